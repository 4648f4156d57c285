//! Landweber iterates against a dense SVD oracle, filter bounds and the
//! power method on a real operator.

mod common;

use common::*;
use geoxray_core::landweber::power_iteration;
use geoxray_core::xray::PreconditionedSystem;
use geoxray_core::{
    estimate_opnorm, filter_g, filter_phi, landweber_run, make_cutoff, make_metric, make_rayset,
    ForwardOperator, Grid2D, LandweberConfig, LandweberSystem, ScalarField2D, SpeedConvention,
    SpeedKind,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Dense system with Euclidean inner products and an SPD preconditioner.
struct Dense {
    a: DMatrix<f64>,
    p: DMatrix<f64>,
}

impl LandweberSystem for Dense {
    fn model_len(&self) -> usize {
        self.a.ncols()
    }
    fn data_len(&self) -> usize {
        self.a.nrows()
    }
    fn forward(&self, f: &[f64]) -> Vec<f64> {
        (&self.a * DVector::from_column_slice(f)).as_slice().to_vec()
    }
    fn adjoint(&self, s: &[f64]) -> Vec<f64> {
        (self.a.transpose() * DVector::from_column_slice(s)).as_slice().to_vec()
    }
    fn precondition(&self, g: &[f64]) -> Vec<f64> {
        (&self.p * DVector::from_column_slice(g)).as_slice().to_vec()
    }
    fn model_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
    fn data_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(rows, cols, |_, _| uniform(&mut r))
}

fn dense_system(seed: u64) -> (Dense, DVector<f64>) {
    let a = random_matrix(20, 15, seed);
    let b = random_matrix(15, 15, seed + 1);
    let p = &b * b.transpose() / 15.0 + DMatrix::identity(15, 15) * 0.1;
    let mut r = rng(seed + 2);
    let psi = DVector::from_fn(20, |_, _| uniform(&mut r));
    (Dense { a, p }, psi)
}

/// `f_k = sum_i phi_k(s_i) <u_i, m> / s_i v_i` for the SVD of
/// `L = P^{1/2} A^T A` and `m = P^{1/2} A^T psi`.
fn svd_iterate(sys: &Dense, psi: &DVector<f64>, gamma: f64, k: u32) -> DVector<f64> {
    let eig = sys.p.clone().symmetric_eigen();
    let sqrt_p = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
        * eig.eigenvectors.transpose();
    let l = &sqrt_p * sys.a.transpose() * &sys.a;
    let m = &sqrt_p * sys.a.transpose() * psi;
    let svd = l.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut f = DVector::zeros(15);
    for i in 0..15 {
        let s = svd.singular_values[i];
        let coef = filter_phi(k, gamma, s) * u.column(i).dot(&m) / s;
        f += vt.row(i).transpose() * coef;
    }
    f
}

fn opnorm_sq(sys: &Dense) -> f64 {
    let ata = sys.a.transpose() * &sys.a;
    let l_sq = &ata * &sys.p * &ata;
    l_sq.symmetric_eigen().eigenvalues.max()
}

#[test]
fn iterates_match_svd_filter_representation() {
    let (sys, psi) = dense_system(3);
    let gamma = 0.9 / opnorm_sq(&sys);
    let cfg = LandweberConfig::new(gamma, 50).with_snapshots(&[1, 5, 50]);
    let state = landweber_run(&sys, psi.as_slice(), &cfg).unwrap();
    for k in [1u32, 5, 50] {
        let got = DVector::from_column_slice(state.snapshot(k as usize).unwrap());
        let want = svd_iterate(&sys, &psi, gamma, k);
        let err = (&got - &want).norm() / want.norm();
        assert!(err < 1e-10, "k = {k}: relative error {err:e}");
    }
}

#[test]
fn first_iterate_is_gamma_ata_p_at_psi() {
    let (sys, psi) = dense_system(8);
    let gamma = 0.5 / opnorm_sq(&sys);
    let state = landweber_run(&sys, psi.as_slice(), &LandweberConfig::new(gamma, 1)).unwrap();
    let ata = sys.a.transpose() * &sys.a;
    let want = &ata * &sys.p * sys.a.transpose() * &psi * gamma;
    let err = (DVector::from_column_slice(&state.iterate) - &want).norm() / want.norm();
    assert!(err < 1e-12, "{err:e}");
}

#[test]
fn preconditioned_residual_is_monotone() {
    let (sys, psi) = dense_system(21);
    let gamma = 0.9 / opnorm_sq(&sys);
    let state = landweber_run(&sys, psi.as_slice(), &LandweberConfig::new(gamma, 200)).unwrap();
    let h = state.preconditioned_residual_history();
    assert_eq!(h.len(), 201);
    for w in h.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
    }
}

/// Maximises `g_k` on `(0, 1/sqrt(gamma)]` by golden-section search on the
/// interval around its single interior maximum.
fn sup_g(k: u32, gamma: f64) -> f64 {
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (1e-9, 1.0 / gamma.sqrt());
    for _ in 0..200 {
        let c = b - invphi * (b - a);
        let d = a + invphi * (b - a);
        if filter_g(k, gamma, c) > filter_g(k, gamma, d) {
            b = d;
        } else {
            a = c;
        }
    }
    filter_g(k, gamma, 0.5 * (a + b))
}

#[test]
fn filter_g_peak_grows_like_sqrt_k() {
    for k in [5u32, 20, 40, 80] {
        let s = sup_g(k, 1.0);
        let root = (k as f64).sqrt();
        assert!(s >= 0.5 * root, "k = {k}: {s}");
        assert!(s <= root, "k = {k}: {s}");
    }
}

#[test]
fn power_method_stabilizes_on_waveguide() {
    let grid = Grid2D::new(128).unwrap();
    let m = make_metric(SpeedKind::C1, SpeedConvention::Index, grid);
    let rays = make_rayset(64, 128).unwrap();
    let op = ForwardOperator::build(&m, &ScalarField2D::zeros(grid), &rays, m.default_dt()).unwrap();
    let chi = make_cutoff(grid, 0.75, 0.99).unwrap();
    let est = estimate_opnorm(&op, &chi, 100).unwrap();
    let r = &est.rayleigh;
    assert_eq!(r.len(), 100);
    for w in r.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-9));
    }
    let drift = (r[99] - r[89]) / r[99];
    assert!(drift < 1e-3, "relative drift over the last 10 steps {drift:e}");

    // A different start lands on the same value.
    let sys = PreconditionedSystem::new(&op, chi).unwrap();
    let other = power_iteration(&sys, 100, 77).unwrap();
    assert!((other.value - est.value).abs() < 1e-3 * est.value);
}

proptest! {
    #[test]
    fn phi_is_a_monotone_filter(k in 1u32..200, gamma in 0.01f64..10.0, s in 0.0f64..1.0) {
        let lambda = s / gamma.sqrt();
        let a = filter_phi(k, gamma, lambda);
        let b = filter_phi(k + 1, gamma, lambda);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a - 1e-15);
        prop_assert!(filter_g(k, gamma, lambda) <= (k as f64 * gamma).sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn iteration_is_linear_in_data(seed in 0u64..1000, c in -3.0f64..3.0) {
        let (sys, psi) = dense_system(seed);
        let mut r = rng(seed ^ 0xabc);
        let phi = DVector::from_fn(20, |_, _| uniform(&mut r));
        let gamma = 0.9 / opnorm_sq(&sys);
        let cfg = LandweberConfig::new(gamma, 7);
        let run = |d: &DVector<f64>| DVector::from_column_slice(&landweber_run(&sys, d.as_slice(), &cfg).unwrap().iterate);
        let lhs = run(&(&psi * c + &phi));
        let rhs = run(&psi) * c + run(&phi);
        prop_assert!((&lhs - &rhs).norm() <= 1e-10 * rhs.norm().max(1.0));
    }
}
