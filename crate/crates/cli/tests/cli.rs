use ghostim_cli::manifest::read_manifest;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ghostim(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ghostim"))
        .args(args)
        .env("GHOSTIM_THREADS", threads)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ghostim(args, "1");
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn summary_value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .and_then(|v| v.split_whitespace().next())
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
fn simulate_thermal_smoke_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = |d: &Path| {
        vec![
            "simulate".to_string(),
            "--width=64".into(),
            "--height=64".into(),
            "--n-frames=100".into(),
            "--seed=4".into(),
            format!("--output-dir={}", d.display()),
        ]
    };
    let run = |d: &Path| ok(&args(d).iter().map(String::as_str).collect::<Vec<_>>());
    let text = run(&a);
    run(&b);
    let g2 = summary_value(&text, "g2_estimate");
    assert!((g2 - 2.0).abs() < 0.1, "{text}");
    assert_eq!(summary_value(&text, "g2_analytic"), 2.0);
    let (_, frames) = ghostim::io::read_frame_dump(&a.join("frames.dump")).unwrap();
    assert_eq!(frames.frames().len(), 100);
    assert_eq!(fs::read(a.join("frames.dump")).unwrap(), fs::read(b.join("frames.dump")).unwrap());
    let summary = fs::read_to_string(a.join("summary.txt")).unwrap();
    assert!(summary.contains("# n_frames = 100"));
    let m = read_manifest(&a.join("manifest.txt")).unwrap();
    assert_eq!(m["frames.dump"].command, "simulate");
    assert!(m.contains_key("summary.txt"));
}

#[test]
fn simulate_case_a_single_mode_g2() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&[
        "simulate",
        "--source=case-a",
        "--width=48",
        "--height=48",
        "--n-frames=10000",
        &format!("--output-dir={}", dir.path().display()),
    ]);
    let g2 = summary_value(&text, "g2_estimate");
    assert!((g2 - 4.0).abs() <= 0.2, "{text}");
    assert_eq!(summary_value(&text, "pinhole_modes"), 1.0);
    assert_eq!(summary_value(&text, "g2_analytic"), 4.0);
}

#[test]
fn reconstruct_requires_a_mask_for_ghost_images() {
    let dir = tempfile::tempdir().unwrap();
    for method in ["gi", "dgi"] {
        let out = ghostim(
            &[
                "reconstruct",
                "--method",
                method,
                "--width=32",
                "--height=32",
                "--n-frames=20",
                &format!("--output-dir={}", dir.path().display()),
            ],
            "1",
        );
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains("needs a mask"));
    }
    let out = ghostim(&["simulate", "--colour=red"], "1");
    assert!(!out.status.success());
    let out = ghostim(&["simulate", "--set", "colour=red"], "1");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reconstruct_from_cache_writes_maps_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display().to_string();
    let common = ["--width=40", "--height=40", "--speckle-radius=1.5", "--n-frames=400"];
    let mut args = vec!["simulate"];
    args.extend(common);
    let o = format!("--output-dir={d}");
    args.push(&o);
    ok(&args);
    let cache = format!("--cache={d}/frames.dump");
    for (method, scale) in [("dgi", "max"), ("gi", "fixed:0.5,3"), ("autocorr", "minmax"), ("pixel", "minmax")] {
        ok(&[
            "reconstruct",
            &cache,
            &o,
            "--mask=square:6",
            &format!("--method={method}"),
            &format!("--scale={scale}"),
        ]);
        let csv = fs::read_to_string(dir.path().join(format!("{method}.csv"))).unwrap();
        // the ensemble keys come from the cache, not the defaults
        assert!(csv.contains("# width = 40") && csv.contains("# n_frames = 400"), "{method}");
        assert!(csv.contains("# input = frame-dump sha256:"));
        let map = ghostim::io::read_map_csv(&dir.path().join(format!("{method}.csv"))).unwrap();
        assert_eq!(map.dim(), (40, 40));
        let img = ghostim::io::read_pgm(&dir.path().join(format!("{method}.pgm"))).unwrap();
        assert_eq!(img.pixels.dim(), (40, 40));
        let metrics = fs::read_to_string(dir.path().join(format!("{method}_metrics.csv"))).unwrap();
        let row = metrics.lines().last().unwrap();
        assert!(row.starts_with(method), "{row}");
        assert_eq!(row.split(',').count(), 5);
    }
    let m = read_manifest(&dir.path().join("manifest.txt")).unwrap();
    for name in ["frames.dump", "dgi.csv", "dgi.pgm", "dgi.pgm.scale", "dgi_metrics.csv", "pixel.csv"] {
        assert!(m.contains_key(name), "{name} missing from manifest");
    }
    assert_ne!(m["dgi.csv"].config, m["gi.csv"].config);
}

#[test]
fn sweep_cardinality_fits_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let text = ok(&[
        "sweep",
        "--width=96",
        "--height=96",
        "--mask=square:20",
        "--n-frames=600",
        "--batches=8",
        "--calibration-frames=150",
        &format!("--output-dir={}", a.display()),
    ]);
    assert!(text.contains("24 records"), "{text}");
    let csv = fs::read_to_string(a.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    let header = lines.iter().position(|l| *l == "ratio,source,method,contrast,snr,n_frames,seed").unwrap();
    let rows: Vec<&str> = lines[header + 1..].iter().copied().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 24);
    let fits: Vec<&str> = lines.iter().copied().filter(|l| l.starts_with("# fit ")).collect();
    assert_eq!(fits.len(), 6);
    let exempt: Vec<&&str> = fits.iter().filter(|l| l.contains("snr_exempt=yes")).collect();
    assert_eq!(exempt.len(), 1);
    assert!(exempt[0].contains("source=case-a method=gi"));
    assert!(a.join("sweep.pgm").exists() && a.join("sweep_details.csv").exists());

    // the embedded configuration alone reproduces the file
    let conf: String = lines[..header]
        .iter()
        .filter_map(|l| l.strip_prefix("# "))
        .map(|l| format!("{l}\n"))
        .collect();
    let conf_path = dir.path().join("embedded.conf");
    fs::write(&conf_path, conf).unwrap();
    ok(&[
        "sweep",
        "--config",
        conf_path.to_str().unwrap(),
        &format!("--output-dir={}", b.display()),
    ]);
    assert_eq!(fs::read(a.join("sweep.csv")).unwrap(), fs::read(b.join("sweep.csv")).unwrap());
    let (ma, mb) = (
        read_manifest(&a.join("manifest.txt")).unwrap(),
        read_manifest(&b.join("manifest.txt")).unwrap(),
    );
    assert_eq!(ma["sweep.csv"], mb["sweep.csv"]);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut seen: Option<Vec<u8>> = None;
    for threads in ["1", "2", "8"] {
        let d = dir.path().join(threads);
        let o = format!("--output-dir={}", d.display());
        let out = ghostim(
            &[
                "reconstruct",
                "--source=case-b",
                "--width=48",
                "--height=48",
                "--n-frames=300",
                "--mask=square:6",
                "--batches=4",
                &o,
            ],
            threads,
        );
        assert!(out.status.success());
        let bytes = fs::read(d.join("dgi.csv")).unwrap();
        if let Some(s) = &seen {
            assert_eq!(s, &bytes, "{threads} threads");
        }
        seen = Some(bytes);
    }
    let out = ghostim(&["simulate", "--n-frames=2"], "many");
    assert_eq!(out.status.code(), Some(2));
}
