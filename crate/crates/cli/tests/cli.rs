use std::fs;
use std::process::Command;

fn microtruss() -> Command {
    Command::new(env!("CARGO_BIN_EXE_microtruss"))
}

const SMALL: [&str; 6] = [
    "--set",
    "steps=2",
    "--set",
    "resolution=8",
    "--set",
    "initial_level=2",
];

#[test]
fn small_run_writes_one_row_per_step_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let status = microtruss()
            .args(SMALL)
            .args(["--set", "laminate_rounds=5", "-o"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(fs::read(out.join("indicators.csv")).unwrap());
        for s in 0..3 {
            assert!(out.join(format!("design_step{s:02}.csv")).exists());
            assert!(out.join(format!("fields_step{s:02}.vtk")).exists());
        }
        assert!(fs::read_to_string(out.join("summary.txt")).unwrap().contains("recommended stop"));
    }
    assert_eq!(outputs[0], outputs[1]);
    let rows = microtruss::io::parse_indicator_csv(std::str::from_utf8(&outputs[0]).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!((r.total - (r.edge + r.volume + r.model)).abs() <= 1e-12 * r.total);
    }
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "scenario = \"cantilever\"\nsteps = 1\nresolution = 8\ninitial_level = 2\nlaminate_rounds = 3\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = microtruss().arg(&cfg).arg("-o").arg(&out).status().unwrap();
    assert!(status.success());
    let text = fs::read_to_string(out.join("indicators.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    for bad in ["steps=0", "fraction=1.5", "colour=red"] {
        let status = microtruss()
            .args(["--set", bad, "-o"])
            .arg(dir.path())
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(1), "{bad}");
    }
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "resolution = [1, 2]\n").unwrap();
    assert_eq!(microtruss().arg(&cfg).status().unwrap().code(), Some(1));
    let missing = dir.path().join("missing.toml");
    assert_ne!(microtruss().arg(&missing).status().unwrap().code(), Some(0));
}
