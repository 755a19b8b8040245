use std::fs;
use std::path::Path;
use std::process::Command;

fn leonet(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_leonet")).args(args).current_dir(cwd).output().unwrap()
}

fn short_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("short.toml");
    fs::write(&path, format!("[solver]\nmax_iterations = 50\n[ablation]\nmax_iterations = 20\n{extra}")).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn subcommands_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), "");
    let cases: [(&str, &[&str]); 3] = [
        (
            "compare",
            &["report.json", "errors.csv", "trace_network.csv", "topology.csv", "fix.csv", "states.csv", "config.toml"],
        ),
        (
            "ablate",
            &["ablation.json", "trace_vanilla.csv", "trace_momentum.csv", "trace_consensus.csv", "trace_combined.csv"],
        ),
        (
            "geometry",
            &["geometry.csv", "observations.csv", "observations.bin", "labels.csv", "topology.csv"],
        ),
    ];
    for (cmd, files) in cases {
        let out = dir.path().join(cmd);
        let o = leonet(&[cmd, "--config", &cfg, "--out", out.to_str().unwrap()], dir.path());
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).contains("runtime"));
        for f in files {
            assert!(out.join(f).is_file(), "{cmd} did not write {f}");
        }
    }
}

#[test]
fn emitted_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path(), "[noise]\nsigma_code_m = 0.2\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(leonet(&["compare", "--config", &cfg, "--seed", "3", "--out", a.to_str().unwrap()], dir.path())
        .status
        .success());
    let resolved = a.join("config.toml");
    assert!(leonet(&["compare", "--config", resolved.to_str().unwrap(), "--out", b.to_str().unwrap()], dir.path())
        .status
        .success());
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
}

#[test]
fn exit_codes_separate_config_from_numerics() {
    let dir = tempfile::tempdir().unwrap();
    let ok = leonet(&["validate-config"], dir.path());
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("20 LEO nodes"));

    fs::write(dir.path().join("typo.toml"), "[leo]\naltitude_m = 550000.0\n").unwrap();
    assert_eq!(leonet(&["validate-config", "--config", "typo.toml"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("bad.toml"), "[leo]\nplanes = 3\n").unwrap();
    assert_eq!(leonet(&["compare", "--config", "bad.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(leonet(&["compare", "--scale", "huge"], dir.path()).status.code(), Some(2));
    assert_eq!(leonet(&["validate-config", "--seed", "18446744073709551615"], dir.path()).status.code(), Some(2));

    let blind = short_config(dir.path(), "[scenario]\nmask_deg = 89.0\n");
    let o = leonet(&["compare", "--config", &blind, "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("estimability"));
}
