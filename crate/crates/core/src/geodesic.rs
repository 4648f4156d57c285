//! Unit-speed geodesics of `c^-2 |dx|^2`, fan-beam ray sets and Jacobi
//! fields.
//!
//! Geodesics are integrated in the variables `(x, theta)` with
//! `x' = c (cos theta, sin theta)` and `theta' = -c (e x grad ln c)`, which is
//! the Hamiltonian flow of `H = c^2 |xi|^2 / 2` on the unit co-sphere
//! bundle. Speed normalisation `|x'| = c(x)` therefore holds exactly at every
//! step.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::grid::ScalarField2D;
use crate::metric::{gaussian_curvature, ConformalMetric, SpeedModel};
use crate::par;
use crate::vec2::Vec2;
use crate::{Error, Result};

/// A point of the unit sphere bundle: position and Euclidean velocity with
/// `|v| = c(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: Vec2,
    pub v: Vec2,
}

impl PhasePoint {
    pub fn new(x: Vec2, v: Vec2) -> Self {
        PhasePoint { x, v }
    }

    pub fn reversed(self) -> Self {
        PhasePoint::new(self.x, -self.v)
    }
}

/// A traced geodesic from its start to the first boundary crossing.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    pub t: Vec<f64>,
    pub points: Vec<PhasePoint>,
    /// `A(t)`: attenuation integrated from the start to `t`.
    pub cum_atten: Vec<f64>,
}

impl GeodesicPath {
    /// Exit time.
    pub fn tau(&self) -> f64 {
        *self.t.last().expect("paths have at least one point")
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn exit(&self) -> PhasePoint {
        *self.points.last().expect("paths have at least one point")
    }

    /// `kappa(t) = exp(-(A(tau) - A(t)))`, the attenuation weight of the
    /// remaining path.
    pub fn kappa(&self) -> Vec<f64> {
        let total = *self.cum_atten.last().unwrap_or(&0.0);
        self.cum_atten
            .iter()
            .map(|a| libm::exp(-(total - a)))
            .collect()
    }

    /// Index `i` with `t[i] <= t < t[i+1]` (clamped to the last step).
    fn step_index(&self, t: f64) -> usize {
        let i = self.t.partition_point(|&s| s <= t);
        i.saturating_sub(1).min(self.t.len().saturating_sub(2))
    }

    /// Cubic Hermite interpolation of the position.
    pub fn position_at(&self, t: f64) -> Vec2 {
        if self.t.len() < 2 {
            return self.points[0].x;
        }
        let i = self.step_index(t);
        let h = self.t[i + 1] - self.t[i];
        let s = ((t - self.t[i]) / h).clamp(0.0, 1.0);
        hermite(&self.points[i], &self.points[i + 1], h, s)
    }

    /// Linear interpolation of the velocity, rescaled to `|v| = c` at the
    /// interpolated position is left to the caller.
    pub fn velocity_at(&self, t: f64) -> Vec2 {
        if self.t.len() < 2 {
            return self.points[0].v;
        }
        let i = self.step_index(t);
        let h = self.t[i + 1] - self.t[i];
        let s = ((t - self.t[i]) / h).clamp(0.0, 1.0);
        self.points[i].v * (1.0 - s) + self.points[i + 1].v * s
    }

    pub fn cum_atten_at(&self, t: f64) -> f64 {
        interp_linear(&self.t, &self.cum_atten, t)
    }

    /// Trapezoidal quadrature weights for the samples.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let m = self.t.len();
        let mut w = alloc::vec![0.0; m];
        for i in 0..m.saturating_sub(1) {
            let h = 0.5 * (self.t[i + 1] - self.t[i]);
            w[i] += h;
            w[i + 1] += h;
        }
        w
    }
}

#[inline]
fn hermite(a: &PhasePoint, b: &PhasePoint, h: f64, s: f64) -> Vec2 {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    a.x * h00 + a.v * (h10 * h) + b.x * h01 + b.v * (h11 * h)
}

fn interp_linear(t: &[f64], y: &[f64], at: f64) -> f64 {
    if t.len() < 2 {
        return y[0];
    }
    let i = t.partition_point(|&s| s <= at).saturating_sub(1).min(t.len() - 2);
    let s = ((at - t[i]) / (t[i + 1] - t[i])).clamp(0.0, 1.0);
    y[i] * (1.0 - s) + y[i + 1] * s
}

#[derive(Debug, Clone, Copy)]
struct State {
    x: Vec2,
    theta: f64,
    atten: f64,
}

/// Fixed-step RK4 geodesic integrator.
#[derive(Debug, Clone, Copy)]
pub struct Tracer<'a> {
    pub dt: f64,
    pub max_steps: usize,
    pub attenuation: Option<&'a ScalarField2D>,
}

pub const DEFAULT_MAX_STEPS: usize = 100_000;
const BOUNDARY_TOL: f64 = 1e-10;

impl<'a> Tracer<'a> {
    pub fn new(dt: f64) -> Self {
        Tracer {
            dt,
            max_steps: DEFAULT_MAX_STEPS,
            attenuation: None,
        }
    }

    pub fn with_attenuation(mut self, a: &'a ScalarField2D) -> Self {
        self.attenuation = Some(a);
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    #[inline]
    fn deriv<M: SpeedModel + ?Sized>(&self, m: &M, s: &State) -> (Vec2, f64, f64) {
        let l = m.local(s.x);
        let e = Vec2::from_angle(s.theta);
        let a = self.attenuation.map_or(0.0, |a| a.eval(s.x));
        (e * l.c, -l.c * e.cross(l.grad_log), a)
    }

    #[inline]
    fn step<M: SpeedModel + ?Sized>(&self, m: &M, s: &State, h: f64) -> State {
        let add = |s: &State, d: &(Vec2, f64, f64), f: f64| State {
            x: s.x + d.0 * f,
            theta: s.theta + d.1 * f,
            atten: s.atten + d.2 * f,
        };
        let k1 = self.deriv(m, s);
        let k2 = self.deriv(m, &add(s, &k1, 0.5 * h));
        let k3 = self.deriv(m, &add(s, &k2, 0.5 * h));
        let k4 = self.deriv(m, &add(s, &k3, h));
        State {
            x: s.x + (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * (h / 6.0),
            theta: s.theta + (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1) * (h / 6.0),
            atten: s.atten + (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2) * (h / 6.0),
        }
    }

    /// Integrates from `start` to the first crossing of `|x| = 1`. The
    /// magnitude of `start.v` is ignored; only its direction is used.
    pub fn shoot<M: SpeedModel + ?Sized>(&self, m: &M, start: PhasePoint) -> Result<GeodesicPath> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {}", self.dt)));
        }
        let r2 = start.x.norm_sq();
        if r2 > 1.0 + 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "start {:?} lies outside the unit disk",
                start.x
            )));
        }
        if start.v.norm_sq() == 0.0 {
            return Err(Error::InvalidArgument("zero start direction".into()));
        }
        if r2 > 1.0 - 1e-9 && start.v.dot(start.x) >= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "boundary start {:?} is not inward",
                start.x
            )));
        }

        let mut state = State {
            x: start.x,
            theta: start.v.angle(),
            atten: 0.0,
        };
        let point = |m: &M, s: &State| PhasePoint::new(s.x, Vec2::from_angle(s.theta) * m.local(s.x).c);
        let mut path = GeodesicPath {
            t: alloc::vec![0.0],
            points: alloc::vec![point(m, &state)],
            cum_atten: alloc::vec![0.0],
        };
        let mut t = 0.0;
        for _ in 0..self.max_steps {
            let next = self.step(m, &state, self.dt);
            if next.x.norm_sq() < 1.0 {
                t += self.dt;
                state = next;
                path.t.push(t);
                path.points.push(point(m, &state));
                path.cum_atten.push(state.atten);
                continue;
            }
            let (h, last) = self.refine_exit(m, &state, next);
            if h > 1e-14 || path.t.len() == 1 {
                path.t.push(t + h);
                path.points.push(point(m, &last));
                path.cum_atten.push(last.atten);
            } else {
                // Previous sample is already on the boundary to within 1e-14.
                let i = path.t.len() - 1;
                path.points[i] = point(m, &last);
                path.cum_atten[i] = last.atten;
            }
            return Ok(path);
        }
        Err(Error::PossiblyTrapped {
            steps: self.max_steps,
        })
    }

    /// Bisection on the step length for the boundary crossing.
    fn refine_exit<M: SpeedModel + ?Sized>(&self, m: &M, from: &State, outside: State) -> (f64, State) {
        let (mut lo, mut hi) = (0.0, self.dt);
        let mut best = (hi, outside);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let s = self.step(m, from, mid);
            let g = s.x.norm() - 1.0;
            if g.abs() <= BOUNDARY_TOL {
                return (mid, s);
            }
            if g < 0.0 {
                lo = mid;
            } else {
                hi = mid;
                best = (mid, s);
            }
            if hi - lo <= f64::EPSILON * self.dt {
                break;
            }
        }
        best
    }
}

/// Traces `start` with step `dt` and no attenuation.
pub fn shoot<M: SpeedModel + ?Sized>(m: &M, start: PhasePoint, dt: f64) -> Result<GeodesicPath> {
    Tracer::new(dt).shoot(m, start)
}

/// One inward boundary ray in fan-beam coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayEntry {
    /// Boundary angle: the ray enters at `(cos beta, sin beta)`.
    pub beta: f64,
    /// Angle from the inner normal, in `(-pi/2, pi/2)`.
    pub alpha: f64,
    /// Entry point with a unit Euclidean direction.
    pub start: PhasePoint,
    /// `cos(alpha) * d_beta * d_alpha`.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaySet {
    n_beta: usize,
    n_alpha: usize,
    entries: Vec<RayEntry>,
}

/// Fan-beam rays: `beta` uniform on `[0, 2 pi)`, `alpha` at the midpoints of
/// `n_alpha` cells covering `(-pi/2, pi/2)`. Entry `ib * n_alpha + ia`.
pub fn make_rayset(n_beta: usize, n_alpha: usize) -> Result<RaySet> {
    if n_beta < 8 || n_alpha < 8 {
        return Err(Error::InvalidArgument(format!(
            "ray set needs at least 8x8 rays, got {n_beta}x{n_alpha}"
        )));
    }
    let d_beta = 2.0 * PI / n_beta as f64;
    let d_alpha = PI / n_alpha as f64;
    let mut entries = Vec::with_capacity(n_beta * n_alpha);
    for ib in 0..n_beta {
        let beta = ib as f64 * d_beta;
        let x = Vec2::from_angle(beta);
        for ia in 0..n_alpha {
            let alpha = -0.5 * PI + (ia as f64 + 0.5) * d_alpha;
            let v = (-x).rotate(alpha);
            entries.push(RayEntry {
                beta,
                alpha,
                start: PhasePoint::new(x, v),
                weight: libm::cos(alpha) * d_beta * d_alpha,
            });
        }
    }
    Ok(RaySet {
        n_beta,
        n_alpha,
        entries,
    })
}

impl RaySet {
    pub fn n_beta(&self) -> usize {
        self.n_beta
    }

    pub fn n_alpha(&self) -> usize {
        self.n_alpha
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_beta, self.n_alpha)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[RayEntry] {
        &self.entries
    }

    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }
}

/// Scalar Jacobi field `b'' + K(gamma(t)) b = 0`, `b(0) = 0`, `b'(0) = 1`,
/// sampled on the path's time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiSolution {
    pub t: Vec<f64>,
    pub b: Vec<f64>,
    pub b_dot: Vec<f64>,
    /// `K` at the path samples.
    pub curvature: Vec<f64>,
    /// `K` at the step midpoints the integrator used, one per step.
    pub curvature_mid: Vec<f64>,
    /// Zeros of `b` in `(0, tau)`, increasing.
    pub conjugate_times: Vec<f64>,
}

/// Integrates the Jacobi equation along `path` with RK4 on the path's own
/// steps. Half-step curvature is read at the cubic Hermite midpoint.
pub fn jacobi_with(path: &GeodesicPath, curvature: impl Fn(Vec2) -> f64) -> JacobiSolution {
    let m = path.len();
    let mut b = Vec::with_capacity(m);
    let mut bd = Vec::with_capacity(m);
    let mut ks = Vec::with_capacity(m);
    let mut kms = Vec::with_capacity(m.saturating_sub(1));
    let (mut y0, mut y1) = (0.0_f64, 1.0_f64);
    let mut k0 = curvature(path.points[0].x);
    b.push(y0);
    bd.push(y1);
    ks.push(k0);
    let mut conjugate_times = Vec::new();
    for i in 0..m.saturating_sub(1) {
        let h = path.t[i + 1] - path.t[i];
        let km = curvature(hermite(&path.points[i], &path.points[i + 1], h, 0.5));
        let k1 = curvature(path.points[i + 1].x);
        let f = |b: f64, bd: f64, k: f64| (bd, -k * b);
        let a1 = f(y0, y1, k0);
        let a2 = f(y0 + 0.5 * h * a1.0, y1 + 0.5 * h * a1.1, km);
        let a3 = f(y0 + 0.5 * h * a2.0, y1 + 0.5 * h * a2.1, km);
        let a4 = f(y0 + h * a3.0, y1 + h * a3.1, k1);
        let n0 = y0 + h / 6.0 * (a1.0 + 2.0 * a2.0 + 2.0 * a3.0 + a4.0);
        let n1 = y1 + h / 6.0 * (a1.1 + 2.0 * a2.1 + 2.0 * a3.1 + a4.1);
        if i > 0 && y0 != 0.0 && (n0 == 0.0 || (y0 < 0.0) != (n0 < 0.0)) {
            let root = path.t[i] + h * y0 / (y0 - n0);
            // Skip a root that lands on the exit point itself.
            if root < path.tau() {
                conjugate_times.push(root);
            }
        }
        y0 = n0;
        y1 = n1;
        k0 = k1;
        b.push(y0);
        bd.push(y1);
        ks.push(k0);
        kms.push(km);
    }
    JacobiSolution {
        t: path.t.clone(),
        b,
        b_dot: bd,
        curvature: ks,
        curvature_mid: kms,
        conjugate_times,
    }
}

/// [`jacobi_with`] reading `K` from a sampled curvature field.
pub fn jacobi(curvature: &ScalarField2D, path: &GeodesicPath) -> JacobiSolution {
    jacobi_with(path, |p| curvature.eval(p))
}

impl JacobiSolution {
    /// `|b'(t0)| / |b'(0)|` at a recorded conjugate time.
    pub fn bdot_ratio(&self, t0: f64) -> Result<f64> {
        let known = self
            .conjugate_times
            .iter()
            .any(|&c| (c - t0).abs() <= 1e-12 * (1.0 + c.abs()));
        if !known {
            return Err(Error::NotConjugateTime(t0));
        }
        Ok(self.b_dot_at(t0).abs() / self.b_dot[0].abs())
    }

    /// `b'(t)` from the cubic Hermite interpolant with node slopes
    /// `b'' = -K b`.
    pub fn b_dot_at(&self, t: f64) -> f64 {
        if self.t.len() < 2 {
            return self.b_dot[0];
        }
        let i = self.t.partition_point(|&s| s <= t).saturating_sub(1).min(self.t.len() - 2);
        let h = self.t[i + 1] - self.t[i];
        let s = ((t - self.t[i]) / h).clamp(0.0, 1.0);
        let (s2, s3) = (s * s, s * s * s);
        let d0 = -self.curvature[i] * self.b[i];
        let d1 = -self.curvature[i + 1] * self.b[i + 1];
        self.b_dot[i] * (2.0 * s3 - 3.0 * s2 + 1.0)
            + d0 * h * (s3 - 2.0 * s2 + s)
            + self.b_dot[i + 1] * (3.0 * s2 - 2.0 * s3)
            + d1 * h * (s3 - s2)
    }

    /// `int_0^t0 (dK/ds) b^2 ds`. On each step `K` is the quadratic through
    /// the sampled end and midpoint values and `b` the cubic Hermite
    /// interpolant; the product is integrated by 4-point Gauss-Legendre.
    pub fn curvature_flux(&self, t0: f64) -> f64 {
        const NODES: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
        const WEIGHTS: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
        let mut acc = 0.0;
        for i in 0..self.t.len().saturating_sub(1) {
            if self.t[i] >= t0 {
                break;
            }
            let h = self.t[i + 1] - self.t[i];
            let end = ((t0 - self.t[i]) / h).min(1.0);
            let (k0, km, k1) = (self.curvature[i], self.curvature_mid[i], self.curvature[i + 1]);
            // dK/ds for s in [0, 1], per unit time.
            let dk = |s: f64| ((4.0 * s - 3.0) * k0 + (4.0 - 8.0 * s) * km + (4.0 * s - 1.0) * k1) / h;
            let b = |s: f64| {
                let (s2, s3) = (s * s, s * s * s);
                self.b[i] * (2.0 * s3 - 3.0 * s2 + 1.0)
                    + self.b_dot[i] * h * (s3 - 2.0 * s2 + s)
                    + self.b[i + 1] * (3.0 * s2 - 2.0 * s3)
                    + self.b_dot[i + 1] * h * (s3 - s2)
            };
            let mut step = 0.0;
            for (x, w) in NODES.iter().zip(WEIGHTS) {
                let s = 0.5 * end * (x + 1.0);
                let bs = b(s);
                step += w * dk(s) * bs * bs;
            }
            acc += step * 0.5 * end * h;
        }
        acc
    }
}

/// First conjugate point along one direction from a base point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateLocusPoint {
    pub direction: f64,
    pub t: f64,
    pub q: Vec2,
}

/// A sampled metric together with its curvature and a step size.
#[derive(Debug, Clone)]
pub struct Geometry {
    metric: ConformalMetric,
    curvature: ScalarField2D,
    dt: f64,
    parallel: bool,
}

impl Geometry {
    pub fn new(metric: ConformalMetric) -> Result<Self> {
        let curvature = gaussian_curvature(&metric)?;
        let dt = metric.default_dt();
        Ok(Geometry {
            metric,
            curvature,
            dt,
            parallel: cfg!(feature = "parallel"),
        })
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn metric(&self) -> &ConformalMetric {
        &self.metric
    }

    pub fn curvature(&self) -> &ScalarField2D {
        &self.curvature
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn parallel(&self) -> bool {
        self.parallel
    }

    pub fn tracer(&self) -> Tracer<'static> {
        Tracer::new(self.dt)
    }

    pub fn shoot(&self, start: PhasePoint) -> Result<GeodesicPath> {
        self.tracer().shoot(&self.metric, start)
    }

    pub fn jacobi(&self, path: &GeodesicPath) -> JacobiSolution {
        jacobi(&self.curvature, path)
    }

    /// First conjugate points of `p` over `n_dirs` equally spaced directions.
    /// Directions without a conjugate point before exit are omitted.
    pub fn conjugate_locus(&self, p: Vec2, n_dirs: usize) -> Result<Vec<ConjugateLocusPoint>> {
        if p.norm_sq() >= 1.0 {
            return Err(Error::InvalidArgument(format!("{p:?} is not in the open disk")));
        }
        let found = par::map_indexed(n_dirs, self.parallel, |i| {
            let direction = 2.0 * PI * i as f64 / n_dirs as f64;
            let path = self.shoot(PhasePoint::new(p, Vec2::from_angle(direction)))?;
            let j = self.jacobi(&path);
            Ok(j.conjugate_times.first().map(|&t| ConjugateLocusPoint {
                direction,
                t,
                q: path.position_at(t),
            }))
        });
        let mut out = Vec::new();
        for f in found {
            if let Some(pt) = f? {
                out.push(pt);
            }
        }
        Ok(out)
    }
}
