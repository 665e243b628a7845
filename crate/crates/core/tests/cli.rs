use std::fs;
use std::path::Path;
use std::process::Command;

use mmfa::cli::{config_digest, run_text, Overrides};
use mmfa::Error;

const MEASURES: &str = r#"
[measures.binom]
base_count = 2
ratios = [0.5, 0.5]
weights = [0.25, 0.75]

[measures.leb]
base_count = 2
ratios = [0.5, 0.5]
weights = [0.5, 0.5]

[vector]
components = ["binom"]
reference = "leb"
"#;

fn config(dir: &Path, job: &str) -> String {
    format!(
        "seed = 11\n\n[output]\ndir = {:?}\n{MEASURES}\n[job]\n{job}\n",
        dir.display().to_string()
    )
}

const SPECTRUM: &str =
    "kind = \"spectrum\"\ndepths = [4, 10]\nq_grid = [-2.0, -1.0, 0.0, 1.0, 2.0]";

/// Data rows of a CSV artifact, header block stripped.
fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let body = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, body)
}

#[test]
fn spectrum_csv_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let text = config(dir.path(), SPECTRUM);
    let out = run_text(&text, &Overrides::default()).unwrap();
    assert!(!out.failed);

    let spectrum = dir.path().join("spectrum.csv");
    let head = fs::read_to_string(&spectrum).unwrap();
    assert!(head.starts_with("# mmfa spectrum\n"));
    assert!(head.contains(&format!("# config_sha256: {}\n", config_digest(&text))));
    assert!(head.contains("# seed: 11\n"));

    let (header, body) = rows(&spectrum);
    assert_eq!(header, ["q", "tau", "alpha", "f_alpha"]);
    assert_eq!(body.len(), 5);
    for row in &body {
        let q: f64 = row[0].parse().unwrap();
        let tau: f64 = row[1].parse().unwrap();
        let oracle = (0.25f64.powf(q) + 0.75f64.powf(q)).log2();
        assert!((tau - oracle).abs() <= 1e-8, "q = {q}: {tau} vs {oracle}");
    }

    let (header, body) = rows(&dir.path().join("roots.csv"));
    assert_eq!(
        header,
        ["q0", "kind", "depth", "root", "residual", "oracle", "abs_err"]
    );
    assert_eq!(body.len(), 5 * 7);
    for row in &body {
        let err: f64 = row[6].parse().unwrap();
        assert!(err <= 1e-8);
    }
}

#[test]
fn empty_q_grid_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = config(
        dir.path(),
        "kind = \"spectrum\"\ndepths = [4, 10]\nq_grid = []",
    );
    let err = run_text(&text, &Overrides::default()).unwrap_err();
    assert!(
        matches!(err, Error::Config(ref m) if m.contains("q_grid")),
        "{err}"
    );

    let path = dir.path().join("job.toml");
    fs::write(&path, &text).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mmfa"))
        .arg("run")
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("q_grid"));
}

#[test]
fn unknown_measure_and_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = config(dir.path(), SPECTRUM).replace("reference = \"leb\"", "reference = \"nope\"");
    assert!(matches!(
        run_text(&text, &Overrides::default()),
        Err(Error::Config(_))
    ));
    let text = config(dir.path(), &format!("{SPECTRUM}\nbogus = 1"));
    assert!(matches!(
        run_text(&text, &Overrides::default()),
        Err(Error::Config(_))
    ));
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let job = "kind = \"density\"\ndepths = [4, 10]\nq = [1.0]\nsamples = 32";
    let text = config(a.path(), job);
    run_text(&text, &Overrides::default()).unwrap();
    let over = Overrides {
        output_dir: Some(b.path().to_path_buf()),
        ..Overrides::default()
    };
    run_text(&text, &over).unwrap();
    for name in ["density.csv", "sandwich.json"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs");
    }
}

#[test]
fn seed_override_changes_samples() {
    let a = tempfile::tempdir().unwrap();
    let job = "kind = \"density\"\ndepths = [4, 10]\nq = [1.0]\nsamples = 16";
    let text = config(a.path(), job);
    run_text(&text, &Overrides::default()).unwrap();
    let first = fs::read_to_string(a.path().join("density.csv")).unwrap();
    let over = Overrides {
        seed: Some(12),
        ..Overrides::default()
    };
    run_text(&text, &over).unwrap();
    let second = fs::read_to_string(a.path().join("density.csv")).unwrap();
    assert!(second.contains("# seed: 12\n"));
    assert_ne!(first, second);
}

#[test]
fn json_format_wraps_rows() {
    let dir = tempfile::tempdir().unwrap();
    let text = config(dir.path(), SPECTRUM);
    let over = Overrides {
        format: Some(mmfa::cli::config::OutputFormat::Json),
        ..Overrides::default()
    };
    run_text(&text, &over).unwrap();
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("spectrum.json")).unwrap())
            .unwrap();
    assert_eq!(doc["job"], "spectrum");
    assert_eq!(doc["seed"], 11);
    assert_eq!(doc["data"]["rows"].as_array().unwrap().len(), 5);
    assert_eq!(doc["data"]["rows"][2]["tau"], 1.0);
}

#[test]
fn regularity_and_verify_jobs_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let reg = dir.path().join("reg.toml");
    fs::write(
        &reg,
        config(
            &dir.path().join("reg"),
            "kind = \"regularity\"\ndepths = [4, 12]\nsamples = 64",
        ),
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mmfa"))
        .args(["run", reg.to_str().unwrap(), "--threads", "2"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let (header, body) = rows(&dir.path().join("reg/regularity.csv"));
    assert_eq!(header[0], "measure");
    assert_eq!(body.len(), 2 * 9);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("reg/regularity.json")).unwrap())
            .unwrap();
    assert_eq!(summary["data"]["doubling"]["in_pd"], false);

    let verify = dir.path().join("verify.toml");
    fs::write(
        &verify,
        config(
            &dir.path().join("ignored"),
            "kind = \"verify\"\ndepths = [4, 10]\nq_grid = [-1.0, 0.0, 1.0, 2.0]\nq = [1.0]\nsamples = 64",
        ),
    )
    .unwrap();
    let target = dir.path().join("verify-out");
    let out = Command::new(env!("CARGO_BIN_EXE_mmfa"))
        .args([
            "run",
            verify.to_str().unwrap(),
            "--output-dir",
            target.to_str().unwrap(),
            "--format",
            "json",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(!dir.path().join("ignored").exists());
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(target.join("verify.json")).unwrap()).unwrap();
    for key in ["billingsley", "density_sets", "sandwich"] {
        assert_eq!(doc["data"][key]["verdict"], "pass", "{key}");
    }
}
