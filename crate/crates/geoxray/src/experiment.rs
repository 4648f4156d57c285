//! End-to-end experiment: phantom, data, Landweber, measurements, outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use geoxray_core::landweber::HistoryEntry;
use geoxray_core::microlocal::{
    locus_mask, masked_energy, truth_region, LOCUS_DILATE, TRUTH_DILATE, TRUTH_REL,
};
use geoxray_core::xray::PreconditionedSystem;
use geoxray_core::{
    amplitude_ratio, artifact_metrics, census, choose_gamma, estimate_opnorm, landweber_run,
    make_attenuation, make_cutoff, make_metric, make_phantom, make_rayset, max_multiplicity,
    ForwardOperator, Geometry, Grid2D, LandweberConfig, PhantomSpec, ScalarField2D, Sinogram,
    Stability, StabilityReport, Vec2,
};

use crate::config::{ExperimentConfig, GammaMode};
use crate::io;
use crate::RunError;

/// Measurements of one stored iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotMetrics {
    pub k: usize,
    /// `max |f_k - f| / max |f|` over the grid (absolute if `f = 0`).
    pub linf_rel_error: f64,
    pub amp_ratio_true: f64,
    /// 0 when the locus mask is empty.
    pub artifact_to_signal: f64,
    pub iterate_norm: f64,
    /// `f_k` energy on the locus mask above / below the phantom center.
    pub locus_energy_upper: f64,
    pub locus_energy_lower: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CensusSummary {
    pub pairs: usize,
    pub max_multiplicity: usize,
    pub unstable: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub name: String,
    pub n: usize,
    pub n_beta: usize,
    pub n_alpha: usize,
    pub speed: &'static str,
    pub convention: &'static str,
    pub attenuation: &'static str,
    pub phantom: &'static str,
    pub noise: &'static str,
    pub seed: u64,
    pub k_max: usize,
    /// `None` when gamma was fixed in the config.
    pub opnorm: Option<f64>,
    pub gamma: f64,
    pub final_residual: f64,
    pub final_preconditioned_residual: f64,
    pub locus_nodes: usize,
    pub census: Option<CensusSummary>,
    /// One entry per stored iterate, ascending in `k`; the last is `k_max`.
    pub snapshots: Vec<SnapshotMetrics>,
}

impl RunSummary {
    pub fn last(&self) -> &SnapshotMetrics {
        self.snapshots.last().expect("k_max is always a snapshot")
    }

    pub fn snapshot(&self, k: usize) -> Option<&SnapshotMetrics> {
        self.snapshots.iter().find(|s| s.k == k)
    }

    /// Flat `key = value` record. Floats use the shortest round-trip form.
    pub fn to_record(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("name", &self.name);
        kv("n", &self.n);
        kv("n_beta", &self.n_beta);
        kv("n_alpha", &self.n_alpha);
        kv("speed", &self.speed);
        kv("convention", &self.convention);
        kv("attenuation", &self.attenuation);
        kv("phantom", &self.phantom);
        kv("noise", &self.noise);
        kv("seed", &self.seed);
        kv("k_max", &self.k_max);
        match self.opnorm {
            Some(v) => kv("opnorm", &v),
            None => kv("opnorm", &"none"),
        }
        kv("gamma", &self.gamma);
        kv("final_residual", &self.final_residual);
        kv("final_preconditioned_residual", &self.final_preconditioned_residual);
        let last = *self.last();
        kv("amp_ratio_true", &last.amp_ratio_true);
        kv("artifact_to_signal", &last.artifact_to_signal);
        kv("linf_rel_error", &last.linf_rel_error);
        kv("locus_nodes", &self.locus_nodes);
        if let Some(c) = self.census {
            kv("census.pairs", &c.pairs);
            kv("census.max_multiplicity", &c.max_multiplicity);
            kv("census.unstable", &c.unstable);
        }
        for m in &self.snapshots {
            let p = format!("k{}", m.k);
            kv(&format!("{p}.linf_rel_error"), &m.linf_rel_error);
            kv(&format!("{p}.amp_ratio_true"), &m.amp_ratio_true);
            kv(&format!("{p}.artifact_to_signal"), &m.artifact_to_signal);
            kv(&format!("{p}.iterate_norm"), &m.iterate_norm);
            kv(&format!("{p}.locus_energy_upper"), &m.locus_energy_upper);
            kv(&format!("{p}.locus_energy_lower"), &m.locus_energy_lower);
        }
        s
    }
}

/// Everything a run produces, before it is written anywhere.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub summary: RunSummary,
    pub truth: ScalarField2D,
    /// The data the reconstruction used (noisy if noise was requested).
    pub data: Sinogram,
    pub snapshots: Vec<(usize, ScalarField2D)>,
    pub history: Vec<HistoryEntry>,
    pub locus_mask: Option<ScalarField2D>,
    pub census: Option<Vec<StabilityReport>>,
}

/// Runs `cfg` and writes its outputs when `cfg.out_dir` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary, RunError> {
    let out = execute(cfg)?;
    if let Some(dir) = &cfg.out_dir {
        write_outputs(&out, dir)?;
    }
    Ok(out.summary)
}

pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let ctx = |source| RunError::Experiment {
        name: cfg.name.clone(),
        source,
    };
    let grid = Grid2D::new(cfg.n).map_err(ctx)?;
    let metric = make_metric(cfg.speed, cfg.convention, grid);
    let atten = make_attenuation(&cfg.attenuation, grid);
    let rays = make_rayset(cfg.n_beta, cfg.n_alpha).map_err(ctx)?;
    log::info!(
        "{}: tracing {} rays on a {n}x{n} grid",
        cfg.name,
        rays.len(),
        n = cfg.n
    );
    let op = ForwardOperator::build(&metric, &atten, &rays, metric.default_dt()).map_err(ctx)?;

    let truth = make_phantom(&cfg.phantom, grid);
    let clean = op.forward(&truth).map_err(ctx)?;
    let data = cfg.noise.apply(&clean).map_err(ctx)?;

    let chi = make_cutoff(grid, cfg.cutoff.0, cfg.cutoff.1).map_err(ctx)?;
    let (opnorm, gamma) = match cfg.gamma {
        GammaMode::Auto { safety } => {
            let est = estimate_opnorm(&op, &chi, cfg.opnorm_iters).map_err(ctx)?;
            (Some(est.value), choose_gamma(est.value, safety).map_err(ctx)?)
        }
        GammaMode::Fixed(g) => (None, g),
    };
    log::info!("{}: gamma = {gamma:e}, opnorm = {opnorm:?}", cfg.name);

    let snaps = cfg.snapshot_list();
    let sys = PreconditionedSystem::new(&op, chi).map_err(ctx)?;
    let lw = LandweberConfig::new(gamma, cfg.k_max).with_snapshots(&snaps);
    let state = landweber_run(&sys, data.values(), &lw).map_err(ctx)?;
    let snapshots: Vec<(usize, ScalarField2D)> = state
        .snapshots
        .iter()
        .map(|(k, v)| ScalarField2D::from_values(grid, v.clone()).map(|f| (*k, f)))
        .collect::<Result<_, _>>()
        .map_err(ctx)?;

    let mask = if cfg.phantom == PhantomSpec::Zero {
        None
    } else {
        let geo = Geometry::new(metric.clone()).map_err(ctx)?;
        let region = truth_region(&truth, TRUTH_REL, TRUTH_DILATE);
        let seeds = mask_seeds(&cfg.phantom);
        Some(locus_mask(&geo, &seeds, cfg.mask_dirs, LOCUS_DILATE, Some(&region)).map_err(ctx)?)
    };

    let mut metrics = Vec::with_capacity(snapshots.len());
    for (k, recon) in &snapshots {
        let norm = state
            .history
            .iter()
            .find(|h| h.k == *k)
            .map_or(f64::NAN, |h| h.iterate_norm);
        metrics.push(measure(*k, recon, &truth, mask.as_ref(), cfg.phantom.center(), norm).map_err(ctx)?);
    }

    let census = if cfg.census {
        Some(census(&op).map_err(ctx)?)
    } else {
        None
    };
    let last = state.history.last().copied().expect("history holds k_max");
    let summary = RunSummary {
        name: cfg.name.clone(),
        n: cfg.n,
        n_beta: cfg.n_beta,
        n_alpha: cfg.n_alpha,
        speed: cfg.speed.name(),
        convention: cfg.convention.name(),
        attenuation: cfg.attenuation.name(),
        phantom: cfg.phantom.name(),
        noise: cfg.noise.name(),
        seed: cfg.seed,
        k_max: cfg.k_max,
        opnorm,
        gamma,
        final_residual: last.residual,
        final_preconditioned_residual: last.preconditioned_residual,
        locus_nodes: mask
            .as_ref()
            .map_or(0, |m| m.values().iter().filter(|&&v| v != 0.0).count()),
        census: census.as_ref().map(|r| CensusSummary {
            pairs: r.len(),
            max_multiplicity: max_multiplicity(r),
            unstable: r.iter().filter(|x| x.stability == Stability::Unstable).count(),
        }),
        snapshots: metrics,
    };
    Ok(RunOutput {
        config: cfg.clone(),
        summary,
        truth,
        data,
        snapshots,
        history: state.history,
        locus_mask: mask,
        census,
    })
}

/// The phantom center and eight points on a circle of its core radius.
fn mask_seeds(phantom: &PhantomSpec) -> Vec<Vec2> {
    let c = phantom.center();
    let r = phantom.core_radius();
    let mut seeds = vec![c];
    for i in 0..8 {
        let a = i as f64 * std::f64::consts::FRAC_PI_4;
        seeds.push(c + Vec2::from_angle(a) * r);
    }
    seeds.retain(|s| s.norm() < 1.0);
    seeds
}

fn measure(
    k: usize,
    recon: &ScalarField2D,
    truth: &ScalarField2D,
    mask: Option<&ScalarField2D>,
    center: Vec2,
    iterate_norm: f64,
) -> geoxray_core::Result<SnapshotMetrics> {
    let tmax = truth.max_abs();
    let err = recon
        .values()
        .iter()
        .zip(truth.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut m = SnapshotMetrics {
        k,
        linf_rel_error: if tmax > 0.0 { err / tmax } else { err },
        amp_ratio_true: amplitude_ratio(recon, truth)?,
        artifact_to_signal: 0.0,
        iterate_norm,
        locus_energy_upper: 0.0,
        locus_energy_lower: 0.0,
    };
    let Some(mask) = mask.filter(|m| m.max_abs() > 0.0) else {
        return Ok(m);
    };
    m.artifact_to_signal = artifact_metrics(recon, truth, mask)?.artifact_to_signal;
    let grid = mask.grid();
    let half = |upper: bool| {
        let mut h = mask.clone();
        for (i, v) in h.values_mut().iter_mut().enumerate() {
            if (grid.node(i).y > center.y) != upper {
                *v = 0.0;
            }
        }
        h
    };
    m.locus_energy_upper = masked_energy(recon, &half(true))?;
    m.locus_energy_lower = masked_energy(recon, &half(false))?;
    Ok(m)
}

/// Writes images, binaries, CSVs and the summary into `dir`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let write_text = |name: &str, text: &str| {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|source| RunError::Io { path: p, source })
    };
    write_text("config.txt", &out.config.to_string())?;
    write_text("summary.txt", &out.summary.to_record())?;

    io::emit_image(&out.truth, &dir.join("truth.pgm"))?;
    io::write_field_bin(&dir.join("truth.bin"), &out.truth)?;
    for (k, f) in &out.snapshots {
        io::emit_image(f, &dir.join(format!("recon_{k:04}.pgm")))?;
        io::write_field_bin(&dir.join(format!("recon_{k:04}.bin")), f)?;
    }
    if let Some(mask) = &out.locus_mask {
        io::emit_image(mask, &dir.join("locus_mask.pgm"))?;
    }
    io::write_sinogram_csv(&dir.join("sinogram.csv"), &out.data)?;
    io::write_sinogram_bin(&dir.join("sinogram.bin"), &out.data)?;

    io::write_csv(
        &dir.join("residuals.csv"),
        &["k", "residual", "preconditioned_residual", "iterate_norm"],
        out.history.iter().map(|h| {
            [
                h.k.to_string(),
                h.residual.to_string(),
                h.preconditioned_residual.to_string(),
                h.iterate_norm.to_string(),
            ]
        }),
    )?;
    io::write_csv(
        &dir.join("metrics.csv"),
        &[
            "k",
            "linf_rel_error",
            "amp_ratio_true",
            "artifact_to_signal",
            "iterate_norm",
            "locus_energy_upper",
            "locus_energy_lower",
        ],
        out.summary.snapshots.iter().map(|m| {
            [
                m.k.to_string(),
                m.linf_rel_error.to_string(),
                m.amp_ratio_true.to_string(),
                m.artifact_to_signal.to_string(),
                m.iterate_norm.to_string(),
                m.locus_energy_upper.to_string(),
                m.locus_energy_lower.to_string(),
            ]
        }),
    )?;
    if let Some(reports) = &out.census {
        write_census_csv(&dir.join("census.csv"), reports)?;
    }
    Ok(())
}

pub fn write_census_csv(path: &Path, reports: &[StabilityReport]) -> Result<(), RunError> {
    io::write_csv(
        path,
        &["ray_id", "beta", "alpha", "t1", "t2", "detQ", "multiplicity", "bdot_ratio", "stability"],
        reports.iter().map(|r| {
            [
                r.pair.ray.to_string(),
                r.beta.to_string(),
                r.alpha.to_string(),
                r.pair.t1.to_string(),
                r.pair.t2.to_string(),
                r.det_q.to_string(),
                r.multiplicity.to_string(),
                r.pair.bdot_ratio.to_string(),
                r.stability.name().to_string(),
            ]
        }),
    )
}
