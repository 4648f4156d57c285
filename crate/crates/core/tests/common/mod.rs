#![allow(dead_code)]

use geoxray_core::{Grid2D, ScalarField2D, Sinogram, Vec2};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform in `[-1, 1)`.
pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

pub fn random_field(grid: Grid2D, rng: &mut ChaCha8Rng) -> ScalarField2D {
    let v = (0..grid.len()).map(|_| uniform(rng)).collect();
    ScalarField2D::from_values(grid, v).unwrap()
}

pub fn random_sinogram(nb: usize, na: usize, rng: &mut ChaCha8Rng) -> Sinogram {
    Sinogram::from_values(nb, na, (0..nb * na).map(|_| uniform(rng)).collect()).unwrap()
}

pub fn gaussian(center: Vec2, sigma: f64) -> impl Fn(Vec2) -> f64 {
    move |p| (-(p - center).norm_sq() / (2.0 * sigma * sigma)).exp()
}

/// Composite Simpson rule on `[a, b]` with `m` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    assert!(m % 2 == 0);
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}
