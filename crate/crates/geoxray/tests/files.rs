//! File formats and config files on disk.

use geoxray::io::{
    emit_image, read_field_bin, read_field_csv, read_sinogram_bin, sidecar_path, write_field_bin,
    write_field_csv, write_sinogram_bin,
};
use geoxray::{ExperimentConfig, PRESETS};
use geoxray_core::{Grid2D, ScalarField2D, Sinogram};

fn field() -> ScalarField2D {
    ScalarField2D::from_fn(Grid2D::new(17).unwrap(), |p| (3.0 * p.x).sin() * p.y + 1e-17 * p.x)
}

#[test]
fn binary_field_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.bin");
    let f = field();
    write_field_bin(&p, &f).unwrap();
    assert_eq!(read_field_bin(&p).unwrap(), f);
    assert_eq!(std::fs::metadata(&p).unwrap().len(), 8 + 8 * 17 * 17);
}

#[test]
fn csv_field_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.csv");
    let f = field();
    write_field_csv(&p, &f).unwrap();
    assert_eq!(read_field_csv(&p).unwrap(), f);
}

#[test]
fn binary_sinogram_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.bin");
    let s = Sinogram::from_values(3, 5, (0..15).map(|i| i as f64 / 7.0 - 1.0).collect()).unwrap();
    write_sinogram_bin(&p, &s).unwrap();
    assert_eq!(read_sinogram_bin(&p).unwrap(), s);
}

#[test]
fn truncated_binary_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.bin");
    write_field_bin(&p, &field()).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
    let err = read_field_bin(&p).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn pgm_has_grid_dimensions_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.pgm");
    let f = field();
    emit_image(&f, &p).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    let header = b"P5\n17 17 255\n";
    assert!(bytes.starts_with(header), "{:?}", &bytes[..16]);
    assert_eq!(bytes.len(), header.len() + 17 * 17);
    let side = std::fs::read_to_string(sidecar_path(&p)).unwrap();
    let (min, max) = f.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    assert_eq!(side, format!("min = {min}\nmax = {max}\n"));
}

#[test]
fn config_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in PRESETS {
        let cfg = ExperimentConfig::preset(name).unwrap();
        let p = dir.path().join(format!("{name}.cfg"));
        std::fs::write(&p, cfg.to_string()).unwrap();
        let back = ExperimentConfig::parse(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(back, cfg, "{name}");
    }
}

#[test]
fn config_comments_and_blank_lines() {
    let text = "# desk run\n\nname = ex4\n  landweber.k_max = 7  \n# done\n";
    let cfg = ExperimentConfig::parse(text).unwrap();
    assert_eq!(cfg.k_max, 7);
    assert_eq!(cfg.name, "ex4");
}
