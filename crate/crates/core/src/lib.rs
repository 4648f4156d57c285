//! Attenuated geodesic X-ray transform on conformally Euclidean disks.
//!
//! The crate covers the whole numerical pipeline for 2D tomography with
//! bent rays on the unit disk `|x| <= 1` carrying a metric `c(x)^-2 |dx|^2`:
//!
//! * [`grid`] and [`metric`]: sampled fields, the conformal metric, its
//!   Gaussian curvature and the Dirichlet metric Laplacian.
//! * [`geodesic`]: RK4 geodesic tracing, fan-beam ray sets, Jacobi fields
//!   and conjugate points.
//! * [`xray`]: the attenuated forward transform with a cached sample
//!   stencil, its exact discrete adjoint and operator-norm estimation.
//! * [`landweber`]: the Laplacian-preconditioned Landweber iteration and its
//!   spectral filters.
//! * [`phantom`] and [`noise`]: test objects, attenuation profiles and the
//!   Gaussian / Poisson data perturbations.
//! * [`microlocal`]: conjugate-pair stability matrices, multiplicity census
//!   and artifact measurements on reconstructions.
//!
//! The crate is `no_std` (it needs `alloc`). The `std` feature enables
//! `std::error::Error` integration and the `parallel` feature spreads ray
//! work over a rayon pool.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
mod par;
pub mod geodesic;
pub mod grid;
pub mod landweber;
pub mod metric;
pub mod microlocal;
pub mod noise;
pub mod phantom;
pub mod vec2;
pub mod xray;

pub use error::{Error, Result};
pub use geodesic::{
    make_rayset, shoot, ConjugateLocusPoint, Geometry, GeodesicPath, JacobiSolution, PhasePoint,
    RayEntry, RaySet, Tracer,
};
pub use grid::{Grid2D, ScalarField2D};
pub use landweber::{
    choose_gamma, filter_g, filter_phi, landweber_run, LandweberConfig, LandweberState,
    LandweberSystem,
};
pub use metric::{
    gaussian_curvature, make_cutoff, make_metric, make_speed, metric_laplacian, AnalyticSpeed,
    ConformalMetric, SpeedConvention, SpeedKind, SpeedModel,
};
pub use microlocal::{
    amplitude_ratio, artifact_metrics, build_q, census, max_multiplicity, ArtifactMetrics, ConjugatePairRecord, Stability,
    StabilityReport,
};
pub use noise::{add_gaussian_noise, poisson_modulate, NoiseSpec};
pub use phantom::{make_attenuation, make_phantom, AttenuationKind, PhantomSpec};
pub use vec2::Vec2;
pub use xray::{estimate_opnorm, Execution, ForwardOperator, OpNormEstimate, Sinogram};
