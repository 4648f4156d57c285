//! The attenuated geodesic X-ray transform and its discrete transpose.
//!
//! Every ray is traced once at build time. Each path sample keeps its
//! bilinear stencil and the weight `trapezoid(dt) * kappa(t)`, so `forward`
//! is a gather and `adjoint` the matching scatter.
//!
//! Inner products: fields use the Riemannian area `sum f g c^-2 h^2`,
//! sinograms use `sum s t w_ray` with the ray-set quadrature weights. The
//! adjoint is the exact transpose in these inner products, which also makes
//! the metric Laplacian self-adjoint on the model side.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::geodesic::{GeodesicPath, RaySet, Tracer};
use crate::grid::{Grid2D, ScalarField2D};
use crate::landweber::{power_iteration, LandweberSystem};
use crate::metric::{metric_laplacian, ConformalMetric};
use crate::par;
use crate::{Error, Result};

/// Transform values on a ray set, entry `ib * n_alpha + ia`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    n_beta: usize,
    n_alpha: usize,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(n_beta: usize, n_alpha: usize) -> Self {
        Sinogram {
            n_beta,
            n_alpha,
            values: vec![0.0; n_beta * n_alpha],
        }
    }

    pub fn from_values(n_beta: usize, n_alpha: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_beta * n_alpha {
            return Err(Error::ShapeMismatch {
                expected: (n_beta, n_alpha),
                found: (values.len(), 1),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sinogram entry {i}")));
        }
        Ok(Sinogram {
            n_beta,
            n_alpha,
            values,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_beta, self.n_alpha)
    }

    pub fn n_beta(&self) -> usize {
        self.n_beta
    }

    pub fn n_alpha(&self) -> usize {
        self.n_alpha
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, ib: usize, ia: usize) -> f64 {
        self.values[ib * self.n_alpha + ia]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Sinogram {
        Sinogram {
            n_beta: self.n_beta,
            n_alpha: self.n_alpha,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    fn check(&self, shape: (usize, usize)) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape,
                found: self.shape(),
            });
        }
        Ok(())
    }
}

/// How ray loops are scheduled. Both give results equal to within 1e-12;
/// the adjoint reduces a fixed set of chunks in order either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

impl Execution {
    fn parallel(self) -> bool {
        self == Execution::Parallel
    }
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    node: u32,
    fx: f32,
    fy: f32,
    w: f64,
}

impl Sample {
    #[inline]
    fn weights(&self) -> [f64; 4] {
        let (fx, fy) = (self.fx as f64, self.fy as f64);
        [
            (1.0 - fx) * (1.0 - fy),
            fx * (1.0 - fy),
            (1.0 - fx) * fy,
            fx * fy,
        ]
    }
}

const ADJOINT_CHUNKS: usize = 32;

/// Discretized `X_a f(gamma) = int kappa f ds` on a fixed ray set.
#[derive(Debug, Clone)]
pub struct ForwardOperator {
    metric: ConformalMetric,
    attenuation: ScalarField2D,
    rays: RaySet,
    dt: f64,
    samples: Vec<Sample>,
    offsets: Vec<usize>,
    tau: Vec<f64>,
    execution: Execution,
}

impl ForwardOperator {
    /// Traces every ray of `rays` with step `dt`. `a` must be nonnegative.
    pub fn build(m: &ConformalMetric, a: &ScalarField2D, rays: &RaySet, dt: f64) -> Result<Self> {
        a.check_grid(m.grid())?;
        if let Some(i) = a.values().iter().position(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "attenuation must be nonnegative, node {i} has {}",
                a.values()[i]
            )));
        }
        let tracer = Tracer::new(dt).with_attenuation(a);
        let grid = m.grid();
        let traced = par::map_indexed(rays.len(), cfg!(feature = "parallel"), |r| {
            let path = tracer.shoot(m, rays.entries()[r].start)?;
            Ok::<_, Error>((path.tau(), ray_samples(grid, &path)))
        });
        let mut samples = Vec::new();
        let mut offsets = Vec::with_capacity(rays.len() + 1);
        let mut tau = Vec::with_capacity(rays.len());
        offsets.push(0);
        for t in traced {
            let (t, s) = t?;
            tau.push(t);
            samples.extend_from_slice(&s);
            offsets.push(samples.len());
        }
        log::debug!("traced {} rays, {} samples", rays.len(), samples.len());
        Ok(ForwardOperator {
            metric: m.clone(),
            attenuation: a.clone(),
            rays: rays.clone(),
            dt,
            samples,
            offsets,
            tau,
            execution: Execution::default(),
        })
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn execution(&self) -> Execution {
        self.execution
    }

    pub fn metric(&self) -> &ConformalMetric {
        &self.metric
    }

    pub fn attenuation(&self) -> &ScalarField2D {
        &self.attenuation
    }

    pub fn rays(&self) -> &RaySet {
        &self.rays
    }

    pub fn grid(&self) -> Grid2D {
        self.metric.grid()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Exit time of ray `r`.
    pub fn tau(&self, r: usize) -> f64 {
        self.tau[r]
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn zero_sinogram(&self) -> Sinogram {
        Sinogram::zeros(self.rays.n_beta(), self.rays.n_alpha())
    }

    /// Re-traces ray `r` with attenuation, returning the full path.
    pub fn trace(&self, r: usize) -> Result<GeodesicPath> {
        Tracer::new(self.dt)
            .with_attenuation(&self.attenuation)
            .shoot(&self.metric, self.rays.entries()[r].start)
    }

    fn ray_sum(&self, r: usize, f: &[f64]) -> f64 {
        let n = self.grid().n();
        let mut acc = 0.0;
        for s in &self.samples[self.offsets[r]..self.offsets[r + 1]] {
            let b = s.node as usize;
            let w = s.weights();
            acc += s.w * (w[0] * f[b] + w[1] * f[b + 1] + w[2] * f[b + n] + w[3] * f[b + n + 1]);
        }
        acc
    }

    pub fn forward(&self, f: &ScalarField2D) -> Result<Sinogram> {
        f.check_grid(self.grid())?;
        Ok(Sinogram {
            n_beta: self.rays.n_beta(),
            n_alpha: self.rays.n_alpha(),
            values: self.forward_raw(f.values()),
        })
    }

    fn forward_raw(&self, f: &[f64]) -> Vec<f64> {
        par::map_indexed(self.rays.len(), self.execution.parallel(), |r| self.ray_sum(r, f))
    }

    /// Exact transpose of [`forward`](Self::forward).
    pub fn adjoint(&self, s: &Sinogram) -> Result<ScalarField2D> {
        s.check(self.rays.shape())?;
        let values = self.adjoint_raw(s.values());
        ScalarField2D::from_values(self.grid(), values)
    }

    fn adjoint_raw(&self, s: &[f64]) -> Vec<f64> {
        let grid = self.grid();
        let n = grid.n();
        let n_rays = self.rays.len();
        let chunk = n_rays.div_ceil(ADJOINT_CHUNKS);
        let entries = self.rays.entries();
        let parts = par::map_indexed(ADJOINT_CHUNKS, self.execution.parallel(), |c| {
            let mut acc = vec![0.0; grid.len()];
            for r in (c * chunk).min(n_rays)..((c + 1) * chunk).min(n_rays) {
                let coef = entries[r].weight * s[r];
                if coef == 0.0 {
                    continue;
                }
                for smp in &self.samples[self.offsets[r]..self.offsets[r + 1]] {
                    let b = smp.node as usize;
                    let w = smp.weights();
                    let cw = coef * smp.w;
                    acc[b] += cw * w[0];
                    acc[b + 1] += cw * w[1];
                    acc[b + n] += cw * w[2];
                    acc[b + n + 1] += cw * w[3];
                }
            }
            acc
        });
        let mut out = vec![0.0; grid.len()];
        for p in &parts {
            for (o, v) in out.iter_mut().zip(p) {
                *o += v;
            }
        }
        for (o, mu) in out.iter_mut().zip(self.metric.area_weights()) {
            *o /= mu;
        }
        out
    }

    /// `X* X f`.
    pub fn normal_apply(&self, f: &ScalarField2D) -> Result<ScalarField2D> {
        let s = self.forward(f)?;
        self.adjoint(&s)
    }

    /// Field inner product `sum f g c^-2 h^2`.
    pub fn field_dot(&self, f: &ScalarField2D, g: &ScalarField2D) -> Result<f64> {
        self.metric.dot(f, g)
    }

    /// Sinogram inner product `sum s t w_ray`.
    pub fn sinogram_dot(&self, s: &Sinogram, t: &Sinogram) -> Result<f64> {
        s.check(self.rays.shape())?;
        t.check(self.rays.shape())?;
        Ok(self.data_dot_raw(&s.values, &t.values))
    }

    fn data_dot_raw(&self, s: &[f64], t: &[f64]) -> f64 {
        s.iter()
            .zip(t)
            .zip(self.rays.entries())
            .map(|((a, b), e)| a * b * e.weight)
            .sum()
    }

    pub fn sinogram_norm(&self, s: &Sinogram) -> Result<f64> {
        Ok(libm::sqrt(self.sinogram_dot(s, s)?))
    }
}

fn ray_samples(grid: Grid2D, path: &GeodesicPath) -> Vec<Sample> {
    let kappa = path.kappa();
    path.trapezoid_weights()
        .iter()
        .zip(&kappa)
        .zip(&path.points)
        .filter(|((w, _), _)| **w > 0.0)
        .map(|((w, k), p)| {
            let st = grid.locate(p.x);
            Sample {
                node: st.base as u32,
                fx: st.fx as f32,
                fy: st.fy as f32,
                w: w * k,
            }
        })
        .collect()
}

/// The transform with the preconditioner `chi (-Delta_g) chi`, as used by
/// the Landweber iteration.
#[derive(Debug, Clone)]
pub struct PreconditionedSystem<'a> {
    op: &'a ForwardOperator,
    chi: ScalarField2D,
}

impl<'a> PreconditionedSystem<'a> {
    pub fn new(op: &'a ForwardOperator, chi: ScalarField2D) -> Result<Self> {
        chi.check_grid(op.grid())?;
        Ok(PreconditionedSystem { op, chi })
    }

    pub fn op(&self) -> &ForwardOperator {
        self.op
    }

    pub fn chi(&self) -> &ScalarField2D {
        &self.chi
    }
}

impl LandweberSystem for PreconditionedSystem<'_> {
    fn model_len(&self) -> usize {
        self.op.grid().len()
    }

    fn data_len(&self) -> usize {
        self.op.rays.len()
    }

    fn forward(&self, f: &[f64]) -> Vec<f64> {
        self.op.forward_raw(f)
    }

    fn adjoint(&self, s: &[f64]) -> Vec<f64> {
        self.op.adjoint_raw(s)
    }

    fn precondition(&self, g: &[f64]) -> Vec<f64> {
        let chi = self.chi.values();
        let grid = self.op.grid();
        let u = ScalarField2D::from_values(grid, g.iter().zip(chi).map(|(a, c)| a * c).collect())
            .expect("finite model values");
        let lap = metric_laplacian(&self.op.metric, &u).expect("grid checked at construction");
        lap.values().iter().zip(chi).map(|(l, c)| -l * c).collect()
    }

    fn model_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(self.op.metric.area_weights())
            .map(|((x, y), w)| x * y * w)
            .sum()
    }

    fn data_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.op.data_dot_raw(a, b)
    }
}

/// Power-method estimate of `||L||^2` together with the Rayleigh quotients.
#[derive(Debug, Clone, PartialEq)]
pub struct OpNormEstimate {
    pub value: f64,
    pub rayleigh: Vec<f64>,
}

/// Estimates `||L||^2 = ||X*X chi (-Delta_g) chi X*X||` by power iteration
/// from a fixed pseudo-random start.
pub fn estimate_opnorm(op: &ForwardOperator, chi: &ScalarField2D, iters: usize) -> Result<OpNormEstimate> {
    if iters < 20 {
        return Err(Error::InvalidArgument(format!(
            "power method needs at least 20 iterations, got {iters}"
        )));
    }
    let sys = PreconditionedSystem::new(op, chi.clone())?;
    power_iteration(&sys, iters, 0x5eed)
}
