//! Sample statistics of the noise models.

use geoxray_core::{add_gaussian_noise, poisson_modulate, Sinogram};

fn ramp(nb: usize, na: usize) -> Sinogram {
    let n = nb * na;
    Sinogram::from_values(nb, na, (0..n).map(|i| 0.5 + (i % 97) as f64 / 96.0).collect()).unwrap()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[test]
fn gaussian_noise_has_relative_std() {
    let s = ramp(128, 256);
    let level = 0.17;
    let noisy = add_gaussian_noise(&s, level, 42).unwrap();
    let diff: Vec<f64> = noisy.values().iter().zip(s.values()).map(|(a, b)| a - b).collect();
    let (mean, std) = mean_std(&diff);
    let sigma = level * s.max_abs();
    assert!(mean.abs() < 0.02 * sigma, "mean {mean}");
    assert!((std / sigma - 1.0).abs() < 0.02, "std {std} vs {sigma}");
}

#[test]
fn poisson_counts_at_the_peak() {
    let s = ramp(4, 8);
    let peak_index = s
        .values()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    let max = s.values()[peak_index];
    let draws: Vec<f64> = (0..10_000u64)
        .map(|seed| poisson_modulate(&s, 10.0, seed).unwrap().values()[peak_index])
        .collect();
    let (mean, std) = mean_std(&draws);
    assert!((mean / max - 1.0).abs() < 0.02, "mean {mean} vs {max}");
    let rel = std / mean;
    assert!((rel - 1.0 / 10f64.sqrt()).abs() < 0.01, "relative std {rel}");
    // Counts are integers on the scaled axis.
    for d in &draws[..100] {
        let c = d * 10.0 / max;
        assert!((c - c.round()).abs() < 1e-9);
    }
}
