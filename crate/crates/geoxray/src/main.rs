use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geoxray::experiment::write_census_csv;
use geoxray::{io, run_experiment, ExperimentConfig, RunError};
use geoxray_core::{
    census, filter_g, filter_phi, make_attenuation, make_metric, make_rayset, max_multiplicity,
    AttenuationKind, ForwardOperator, Geometry, Grid2D, PhasePoint, SpeedConvention, SpeedKind,
    Stability, Vec2,
};

#[derive(Parser)]
#[command(name = "geoxray", version, about = "Attenuated geodesic X-ray transform experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct MediumArgs {
    /// c1, c2, c3 or unit.
    #[arg(long, default_value = "c1")]
    speed: String,
    /// index (speed = 1/c) or speed (speed = c).
    #[arg(long, default_value = "index")]
    convention: String,
    /// zero, gaussian_bump or disk2.
    #[arg(long, default_value = "zero")]
    attenuation: String,
    #[arg(long, default_value_t = 128)]
    n: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment preset or config file.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        kmax: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extra `key=value` overrides, applied last.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Conjugate-pair census over a fan-beam ray set.
    Census {
        #[command(flatten)]
        medium: MediumArgs,
        #[arg(long, default_value_t = 128)]
        n_beta: usize,
        #[arg(long, default_value_t = 256)]
        n_alpha: usize,
        /// StabilityReport CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Landweber filter curves phi_k and g_k as CSV.
    Filters {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, value_delimiter = ',', default_value = "5,20,40,80")]
        k: Vec<u32>,
        #[arg(long, default_value_t = 400)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Geodesics (or their first conjugate points) fanning out of a point.
    Geodesics {
        #[command(flatten)]
        medium: MediumArgs,
        /// Start point as x,y.
        #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
        from: String,
        #[arg(long, default_value_t = 16)]
        dirs: usize,
        /// Write the conjugate locus instead of the paths.
        #[arg(long)]
        locus: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn config_err(m: impl Into<String>) -> RunError {
    RunError::Config(m.into())
}

fn medium(m: &MediumArgs) -> Result<(Grid2D, geoxray_core::ConformalMetric, AttenuationKind), RunError> {
    let kind = SpeedKind::from_name(&m.speed).ok_or_else(|| config_err(format!("unknown speed {:?}", m.speed)))?;
    let conv = SpeedConvention::from_name(&m.convention)
        .ok_or_else(|| config_err(format!("unknown convention {:?}", m.convention)))?;
    let atten = match m.attenuation.as_str() {
        "zero" => AttenuationKind::Zero,
        "gaussian_bump" => AttenuationKind::gaussian_bump(),
        "disk2" => AttenuationKind::disk2(),
        other => return Err(config_err(format!("unknown attenuation {other:?}"))),
    };
    let grid = Grid2D::new(m.n)?;
    Ok((grid, make_metric(kind, conv, grid), atten))
}

/// Writes CSV rows to `out`, or to stdout.
fn emit_csv(out: Option<&PathBuf>, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), RunError> {
    match out {
        Some(p) => io::write_csv(p, header, rows),
        None => {
            println!("{}", header.join(","));
            for r in rows {
                println!("{}", r.join(","));
            }
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run {
            config,
            preset,
            n,
            kmax,
            seed,
            out,
            overrides,
        } => {
            let mut cfg = match (&config, &preset) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
                        path: path.clone(),
                        source,
                    })?;
                    let cfg = ExperimentConfig::parse(&text)?;
                    if let Some(p) = &preset {
                        if *p != cfg.name {
                            return Err(config_err(format!(
                                "--preset {p} conflicts with name = {} in the config",
                                cfg.name
                            )));
                        }
                    }
                    cfg.validate()?;
                    cfg
                }
                (None, Some(p)) => ExperimentConfig::preset(p)?,
                (None, None) => return Err(config_err("one of --config or --preset is required")),
            };
            if let Some(n) = n {
                cfg.n = n;
            }
            if let Some(k) = kmax {
                cfg.k_max = k;
            }
            if let Some(s) = seed {
                cfg.set("seed", &s.to_string())?;
            }
            if let Some(o) = out {
                cfg.out_dir = Some(o);
            }
            for kv in &overrides {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| config_err(format!("--set expects KEY=VALUE, got {kv:?}")))?;
                cfg.set(k.trim(), v.trim())?;
            }
            cfg.validate()?;
            let summary = run_experiment(&cfg)?;
            print!("{}", summary.to_record());
        }
        Command::Census {
            medium: m,
            n_beta,
            n_alpha,
            out,
        } => {
            let (grid, metric, atten) = medium(&m)?;
            let rays = make_rayset(n_beta, n_alpha)?;
            let op = ForwardOperator::build(&metric, &make_attenuation(&atten, grid), &rays, metric.default_dt())?;
            let reports = census(&op)?;
            let unstable = reports.iter().filter(|r| r.stability == Stability::Unstable).count();
            println!("rays = {}", rays.len());
            println!("pairs = {}", reports.len());
            println!("unstable = {unstable}");
            println!("max_multiplicity = {}", max_multiplicity(&reports));
            if let Some(p) = out {
                write_census_csv(&p, &reports)?;
            }
        }
        Command::Filters { gamma, k, points, out } => {
            if !(gamma > 0.0) || points < 2 || k.iter().any(|&k| k == 0) {
                return Err(config_err("need gamma > 0, points >= 2 and k >= 1"));
            }
            let top = 1.0 / gamma.sqrt();
            let mut rows = Vec::new();
            for &kk in &k {
                for i in 0..points {
                    let lambda = top * i as f64 / (points - 1) as f64;
                    rows.push(vec![
                        kk.to_string(),
                        lambda.to_string(),
                        filter_phi(kk, gamma, lambda).to_string(),
                        filter_g(kk, gamma, lambda).to_string(),
                    ]);
                }
            }
            emit_csv(out.as_ref(), &["k", "lambda", "phi", "g"], rows)?;
        }
        Command::Geodesics {
            medium: m,
            from,
            dirs,
            locus,
            out,
        } => {
            let (x, y) = from
                .split_once(',')
                .and_then(|(x, y)| Some((x.trim().parse().ok()?, y.trim().parse().ok()?)))
                .ok_or_else(|| config_err(format!("--from expects x,y, got {from:?}")))?;
            let p = Vec2::new(x, y);
            if dirs == 0 {
                return Err(config_err("--dirs must be positive"));
            }
            let (grid, metric, atten) = medium(&m)?;
            let a = make_attenuation(&atten, grid);
            let geo = Geometry::new(metric)?;
            if locus {
                let pts = geo.conjugate_locus(p, dirs)?;
                let rows = pts
                    .iter()
                    .map(|c| vec![c.direction.to_string(), c.t.to_string(), c.q.x.to_string(), c.q.y.to_string()])
                    .collect();
                emit_csv(out.as_ref(), &["dir_angle", "t", "qx", "qy"], rows)?;
            } else {
                let tracer = geo.tracer().with_attenuation(&a);
                let mut rows = Vec::new();
                for i in 0..dirs {
                    let theta = std::f64::consts::TAU * i as f64 / dirs as f64;
                    let path = tracer.shoot(geo.metric(), PhasePoint::new(p, Vec2::from_angle(theta)))?;
                    for ((t, q), att) in path.t.iter().zip(&path.points).zip(&path.cum_atten) {
                        rows.push(vec![
                            i.to_string(),
                            t.to_string(),
                            q.x.x.to_string(),
                            q.x.y.to_string(),
                            q.v.x.to_string(),
                            q.v.y.to_string(),
                            att.to_string(),
                        ]);
                    }
                }
                emit_csv(out.as_ref(), &["ray", "t", "x", "y", "vx", "vy", "cum_atten"], rows)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
