//! Conjugate-pair stability matrices, the multiplicity census and artifact
//! measurements.
//!
//! Along a boundary ray the Jacobi field vanishing at the entry point
//! vanishes again at every point conjugate to it. The entry point and those
//! zeros form one chain of mutually conjugate points; its length is the
//! multiplicity, and consecutive chain members are the pairs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::geodesic::{jacobi, Geometry, GeodesicPath, PhasePoint, Tracer};
use crate::grid::{Grid2D, ScalarField2D};
use crate::metric::{gaussian_curvature, ConformalMetric};
use crate::par;
use crate::vec2::Vec2;
use crate::xray::ForwardOperator;
use crate::{Error, Result};

/// Two consecutive conjugate points on one ray and the four directed weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugatePairRecord {
    pub ray: usize,
    pub t1: f64,
    pub t2: f64,
    pub p1: Vec2,
    pub p2: Vec2,
    /// `[kappa(p1, v1), kappa(p2, v2), kappa(p1, -v1), kappa(p2, -v2)]`.
    pub kappa: [f64; 4],
    /// `|b'(t2)| / |b'(t1)|`.
    pub bdot_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    /// `det Q` vanishes to tolerance: one equation for two unknowns.
    Unstable,
    Stable,
}

impl Stability {
    pub fn name(self) -> &'static str {
        match self {
            Stability::Unstable => "unstable",
            Stability::Stable => "stable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub pair: ConjugatePairRecord,
    pub beta: f64,
    pub alpha: f64,
    pub det_q: f64,
    pub stability: Stability,
    pub multiplicity: usize,
}

/// `Q = [[kappa(p1,v1), kappa(p2,v2)], [kappa(p1,-v1), kappa(p2,-v2)]]`.
pub fn build_q(rec: &ConjugatePairRecord) -> [[f64; 2]; 2] {
    let k = rec.kappa;
    [[k[0], k[1]], [k[2], k[3]]]
}

pub fn det2(q: &[[f64; 2]; 2]) -> f64 {
    q[0][0] * q[1][1] - q[0][1] * q[1][0]
}

/// Classifies with tolerance `1e-6 * max|Q_ij|^2`.
pub fn classify(q: &[[f64; 2]; 2]) -> (f64, Stability) {
    let det = det2(q);
    let m = q.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-6 * m * m;
    let s = if det.abs() <= tol {
        Stability::Unstable
    } else {
        Stability::Stable
    };
    (det, s)
}

/// Weights `kappa(p, v)` at `t1 < t2` on `path`: forward values from the
/// path's accumulated attenuation, backward values by tracing the reversed
/// geodesic from each point to its exit.
pub fn pair_kappas(
    m: &ConformalMetric,
    a: &ScalarField2D,
    dt: f64,
    path: &GeodesicPath,
    t1: f64,
    t2: f64,
) -> Result<[f64; 4]> {
    let total = *path.cum_atten.last().unwrap_or(&0.0);
    let fwd = |t: f64| libm::exp(-(total - path.cum_atten_at(t)));
    let tracer = Tracer::new(dt).with_attenuation(a);
    let bwd = |t: f64| -> Result<f64> {
        let p = path.position_at(t);
        let v = path.velocity_at(t);
        if p.norm_sq() > 1.0 - 1e-9 && v.dot(p) <= 0.0 {
            // On the boundary facing inward: the reversed ray exits at once.
            return Ok(1.0);
        }
        let back = tracer.shoot(m, PhasePoint::new(p, v).reversed())?;
        Ok(libm::exp(-back.cum_atten.last().copied().unwrap_or(0.0)))
    };
    Ok([fwd(t1), fwd(t2), bwd(t1)?, bwd(t2)?])
}

/// Jacobi census of every ray of `op`, in ray order. Rays without conjugate
/// points produce no reports.
pub fn census(op: &ForwardOperator) -> Result<Vec<StabilityReport>> {
    let k = gaussian_curvature(op.metric())?;
    let entries = op.rays().entries();
    let per_ray = par::map_indexed(entries.len(), cfg!(feature = "parallel"), |r| {
        ray_reports(op, &k, r)
    });
    let mut out = Vec::new();
    for reports in per_ray {
        out.extend(reports?);
    }
    Ok(out)
}

fn ray_reports(op: &ForwardOperator, k: &ScalarField2D, r: usize) -> Result<Vec<StabilityReport>> {
    let path = op.trace(r)?;
    let j = jacobi(k, &path);
    if j.conjugate_times.is_empty() {
        return Ok(Vec::new());
    }
    let mut chain = vec![0.0];
    chain.extend_from_slice(&j.conjugate_times);
    let multiplicity = chain.len();
    let e = op.rays().entries()[r];
    let mut out = Vec::with_capacity(chain.len() - 1);
    for w in chain.windows(2) {
        let (t1, t2) = (w[0], w[1]);
        let kappa = pair_kappas(op.metric(), op.attenuation(), op.dt(), &path, t1, t2)?;
        let pair = ConjugatePairRecord {
            ray: r,
            t1,
            t2,
            p1: path.position_at(t1),
            p2: path.position_at(t2),
            kappa,
            bdot_ratio: j.b_dot_at(t2).abs() / j.b_dot_at(t1).abs(),
        };
        let (det_q, stability) = classify(&build_q(&pair));
        out.push(StabilityReport {
            pair,
            beta: e.beta,
            alpha: e.alpha,
            det_q,
            stability,
            multiplicity,
        });
    }
    Ok(out)
}

/// Largest multiplicity in a census (0 if empty).
pub fn max_multiplicity(reports: &[StabilityReport]) -> usize {
    reports.iter().map(|r| r.multiplicity).max().unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArtifactMetrics {
    /// `max |recon|` on the truth region over `max |truth|`.
    pub amp_ratio_true: f64,
    /// `L^2` of `recon` on the locus mask over `L^2` on the truth region.
    pub artifact_to_signal: f64,
}

/// Nodes with `|truth| >= rel * max|truth|`, dilated by `dilate` cells.
pub fn truth_region(truth: &ScalarField2D, rel: f64, dilate: usize) -> ScalarField2D {
    let thr = rel * truth.max_abs();
    let core = truth.map(|v| if thr > 0.0 && v.abs() >= thr { 1.0 } else { 0.0 });
    dilate_mask(&core, dilate)
}

/// Default truth region used by [`artifact_metrics`].
pub const TRUTH_REL: f64 = 0.05;
pub const TRUTH_DILATE: usize = 2;
pub const LOCUS_DILATE: usize = 3;

/// Sets every node within Euclidean distance `cells` (in grid cells) of a
/// nonzero node to 1.
pub fn dilate_mask(mask: &ScalarField2D, cells: usize) -> ScalarField2D {
    let grid = mask.grid();
    let n = grid.n() as isize;
    let r = cells as isize;
    let mut out = ScalarField2D::zeros(grid);
    let src = mask.values();
    let dst = out.values_mut();
    for iy in 0..n {
        for ix in 0..n {
            if src[(iy * n + ix) as usize] == 0.0 {
                continue;
            }
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx * dx + dy * dy > r * r {
                        continue;
                    }
                    let (x, y) = (ix + dx, iy + dy);
                    if (0..n).contains(&x) && (0..n).contains(&y) {
                        dst[(y * n + x) as usize] = 1.0;
                    }
                }
            }
        }
    }
    out
}

/// Rasterizes first conjugate points of each seed onto the nearest nodes,
/// dilates by `dilate` cells and removes `exclude` (a 0/1 mask).
pub fn locus_mask(
    geometry: &Geometry,
    seeds: &[Vec2],
    n_dirs: usize,
    dilate: usize,
    exclude: Option<&ScalarField2D>,
) -> Result<ScalarField2D> {
    let grid = geometry.metric().grid();
    let mut raw = ScalarField2D::zeros(grid);
    for &s in seeds {
        for pt in geometry.conjugate_locus(s, n_dirs)? {
            let i = nearest_node(grid, pt.q);
            raw.values_mut()[i] = 1.0;
        }
    }
    let mut mask = dilate_mask(&raw, dilate);
    if let Some(ex) = exclude {
        mask.same_grid(ex)?;
        for (m, e) in mask.values_mut().iter_mut().zip(ex.values()) {
            if *e != 0.0 {
                *m = 0.0;
            }
        }
    }
    Ok(mask)
}

fn nearest_node(grid: Grid2D, p: Vec2) -> usize {
    let h = grid.spacing();
    let last = (grid.n() - 1) as f64;
    let ix = libm::round((p.x + 1.0) / h).clamp(0.0, last) as usize;
    let iy = libm::round((p.y + 1.0) / h).clamp(0.0, last) as usize;
    grid.index(ix, iy)
}

/// Weighted energy `sum mask * f^2` (flat cell area).
pub fn masked_energy(f: &ScalarField2D, mask: &ScalarField2D) -> Result<f64> {
    f.same_grid(mask)?;
    Ok(f.values()
        .iter()
        .zip(mask.values())
        .map(|(v, m)| m * v * v)
        .sum::<f64>()
        * f.grid().cell_area())
}

fn peak_on(f: &ScalarField2D, region: &ScalarField2D) -> f64 {
    f.values()
        .iter()
        .zip(region.values())
        .filter(|(_, m)| **m != 0.0)
        .fold(0.0f64, |acc, (v, _)| acc.max(v.abs()))
}

/// The `amp_ratio_true` part of [`artifact_metrics`], which needs no locus
/// mask. Returns 0 for a zero truth.
pub fn amplitude_ratio(recon: &ScalarField2D, truth: &ScalarField2D) -> Result<f64> {
    recon.same_grid(truth)?;
    let max = truth.max_abs();
    if max == 0.0 {
        return Ok(0.0);
    }
    Ok(peak_on(recon, &truth_region(truth, TRUTH_REL, TRUTH_DILATE)) / max)
}

/// Measures a reconstruction against the truth. The truth region is
/// [`truth_region`] with the default threshold and dilation.
pub fn artifact_metrics(
    recon: &ScalarField2D,
    truth: &ScalarField2D,
    locus_mask: &ScalarField2D,
) -> Result<ArtifactMetrics> {
    recon.same_grid(truth)?;
    recon.same_grid(locus_mask)?;
    let region = truth_region(truth, TRUTH_REL, TRUTH_DILATE);
    if region.max_abs() == 0.0 {
        return Err(Error::InvalidArgument("truth region is empty".into()));
    }
    if locus_mask.max_abs() == 0.0 {
        return Err(Error::InvalidArgument("locus mask is empty".into()));
    }
    if let Some(i) = locus_mask.values().iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidArgument(format!("locus mask value out of [0, 1] at node {i}")));
    }
    let signal = masked_energy(recon, &region)?;
    let artifact = masked_energy(recon, locus_mask)?;
    Ok(ArtifactMetrics {
        amp_ratio_true: peak_on(recon, &region) / truth.max_abs(),
        artifact_to_signal: if signal > 0.0 {
            libm::sqrt(artifact / signal)
        } else {
            0.0
        },
    })
}
