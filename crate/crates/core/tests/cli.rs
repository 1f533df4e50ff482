mod common;

use std::path::Path;
use std::process::{Command, Output};

use valuechange::grid::{ingest, Format};

fn vc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn constant_field_has_zero_vc() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("const.csv"),
        "dims=1;counts=5;lower=0;upper=1\n2\n2\n2\n2\n2\n",
    )
    .unwrap();
    let o = vc(dir.path(), &["vc", "--input", "const.csv", "--L", "0.2", "--out", "vc.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let f = ingest(&dir.path().join("vc.csv"), Format::CsvGrid).unwrap();
    assert!(f.values().iter().all(|&v| v == 0.0));
}

#[test]
fn validation_and_parse_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&vc(d, &["gen", "sin", "--counts", "11", "--out", "f.csv"])), 0);
    let o = vc(d, &["vc", "--input", "f.csv", "--L", "-1"]);
    assert_eq!(code(&o), 3);
    assert!(!o.stderr.is_empty());
    assert_eq!(code(&vc(d, &["vc", "--input", "f.csv", "--L", "x"])), 2);
    assert_eq!(code(&vc(d, &["vc", "--input", "missing.csv", "--L", "0.1"])), 1);
    std::fs::write(d.join("bad.csv"), "dims=1;counts=3\n1\n").unwrap();
    assert_eq!(code(&vc(d, &["vc", "--input", "bad.csv", "--L", "0.1"])), 2);
    assert_eq!(code(&vc(d, &["frobnicate"])), 2);
    assert_eq!(code(&vc(d, &["gen", "sin", "--counts", "0"])), 3);
    assert_eq!(code(&vc(d, &["gen", "cosine", "--counts", "10"])), 4);
    assert_eq!(code(&vc(d, &["experiment", "cifar"])), 4);
}

#[test]
fn generators_sample_their_objectives() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&vc(d, &["gen", "linear3d", "--counts", "5,4,3", "--out", "lin.csv"])), 0);
    let f = ingest(&d.join("lin.csv"), Format::CsvGrid).unwrap();
    for k in 0..f.len() {
        let x = f.domain().coords(k);
        assert!((f.values()[k] - 10.0 * (x[0] + x[1] + x[2])).abs() < 1e-12);
    }
    assert_eq!(code(&vc(d, &["gen", "piecewise", "--counts", "401", "--out", "pw.csv"])), 0);
    let f = ingest(&d.join("pw.csv"), Format::CsvGrid).unwrap();
    assert_eq!(f.values()[0], -2.0);
    assert_eq!(f.values()[100], 0.0);
    assert_eq!(f.values()[300], 0.0);
}

#[test]
fn pgm_windows_are_in_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // 9x9 image with one bright pixel in the centre
    let mut pgm = String::from("P2\n9 9\n255\n");
    for i in 0..81 {
        pgm.push_str(if i == 40 { "255\n" } else { "0\n" });
    }
    std::fs::write(d.join("dot.pgm"), pgm).unwrap();
    let o = vc(d, &["vc", "--input", "dot.pgm", "--L", "5", "--out", "vc.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let f = ingest(&d.join("vc.csv"), Format::CsvGrid).unwrap();
    // radius 2 pixels around (4, 4)
    let ones: Vec<(usize, usize)> = (0..81)
        .filter(|&k| f.values()[k] == 1.0)
        .map(|k| (k / 9, k % 9))
        .collect();
    assert_eq!(ones.len(), 25);
    assert!(ones.iter().all(|&(r, c)| r.abs_diff(4) <= 2 && c.abs_diff(4) <= 2));
    let o = vc(d, &["vc", "--input", "dot.pgm", "--L", "5", "--format", "pgm", "--out", "vc.pgm"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn ivc_distance_and_density_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&vc(d, &["gen", "sin", "--counts", "201", "--out", "a.csv"])), 0);
    let o = vc(d, &["ivc-dist", "a.csv", "a.csv", "--l-min", "0.1", "--l-max", "0.3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "0");
    let o = vc(d, &["ivc-dist", "a.csv", "a.csv", "--l-min", "0.3", "--l-max", "0.1"]);
    assert_eq!(code(&o), 3);

    let o = vc(d, &["density", "--input", "a.csv", "--L", "0.2", "--out", "dens.csv"]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(d.join("dens.csv")).unwrap();
    assert_eq!(text.lines().count(), 513);
    let o = vc(d, &["density", "--input", "a.csv", "--target", "a.csv", "--L", "0.2", "--out", "r.csv"]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(d.join("r.csv")).unwrap();
    assert!(text.starts_with("vc,target,psi,vcdr\n"));
}

#[test]
fn train_and_vcp_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&vc(d, &["gen", "sin", "--counts", "41", "--out", "s.csv"])), 0);
    let o = vc(
        d,
        &["train", "--input", "s.csv", "--arch", "1,8,1", "--steps", "50", "--lr", "0.01", "--out-dir", "t"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["loss_history.csv", "model.vcm", "prediction.csv"] {
        assert!(d.join("t").join(f).exists(), "{f}");
    }
    let o = vc(
        d,
        &[
            "vcp", "--input", "s.csv", "--mode", "sur", "--nodes", "5", "--arch", "1,8,1", "--l-min", "0.1",
            "--l-max", "0.5", "--steps", "30", "--out-dir", "v",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(d.join("v/vcp_report.txt")).unwrap();
    assert!(report.contains("mode=sur"));
    let o = vc(
        d,
        &[
            "vcp", "--input", "s.csv", "--compact-arch", "1,4,1", "--arch", "1,8,1", "--l-min", "0.1",
            "--l-max", "0.5", "--steps", "30", "--pretrain-steps", "40", "--out-dir", "n",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(d.join("n/vcp_report.txt")).unwrap().contains("mode=nn"));
    let o = vc(d, &["vcp", "--input", "s.csv", "--compact-arch", "1,9,1", "--arch", "1,8,1", "--l-min", "0.1", "--l-max", "0.5"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn config_file_in_working_directory() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("vc.cfg"), "counts=13\nout-dir=generated\n").unwrap();
    assert_eq!(code(&vc(d, &["gen", "sin"])), 0);
    let f = ingest(&d.join("generated/sin.csv"), Format::CsvGrid).unwrap();
    assert_eq!(f.domain().counts(), &[13]);
    assert_eq!(code(&vc(d, &["gen", "sin", "--counts", "7", "--out-dir", "cli"])), 0);
    let f = ingest(&d.join("cli/sin.csv"), Format::CsvGrid).unwrap();
    assert_eq!(f.domain().counts(), &[7]);
}

#[test]
fn experiment_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for out in ["a", "b", "c"] {
        let seed = if out == "c" { "8" } else { "7" };
        let o = vc(d, &["experiment", "piecewise", "--seed", seed, "--scale", "0.02", "--out-dir", out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |p: &str| std::fs::read(d.join(p)).unwrap();
    for f in ["loss_history.csv", "profile.csv", "density_final.csv", "config.txt", "report.txt"] {
        assert_eq!(read(&format!("a/piecewise/{f}")), read(&format!("b/piecewise/{f}")), "{f}");
    }
    assert_ne!(read("a/piecewise/loss_history.csv"), read("c/piecewise/loss_history.csv"));
}

#[test]
fn per_axis_window_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&vc(d, &["gen", "vortex", "--counts", "9,7,5", "--out", "v.csv"])), 0);
    let f = ingest(&d.join("v.csv"), Format::CsvGrid).unwrap();
    let o = vc(d, &["vc", "--input", "v.csv", "--L", "2:0:2", "--unit", "cells", "--out-dir", "w"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let got = ingest(&d.join("w/vc_L2_0_2.csv"), Format::CsvGrid).unwrap();
    let (max, min) = common::scan_extrema(f.values(), &[9, 7, 5], &[1, 0, 1]);
    for k in 0..f.len() {
        assert_eq!(got.values()[k], max[k] - min[k]);
    }
    assert_eq!(code(&vc(d, &["vc", "--input", "v.csv", "--L", "1:1"])), 3);
}
