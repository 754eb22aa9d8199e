use std::path::Path;
use std::process::{Command, Output};

fn lawson(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lawson"))
        .args(args)
        .env("LAWSON_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn group_verify_two_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = lawson(&[
        "group-verify",
        "--m",
        "2",
        "--k",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&read(dir.path(), "group.json")).unwrap();
    assert_eq!(json["order"], 18);
    assert_eq!(json["passed"], true);
}

#[test]
fn build_one_one_writes_parsable_meshes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = lawson(&["build", "--m", "1", "--k", "1", "--n", "8", "--out", d]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let topo = read(dir.path(), "topology.json");
    assert!(topo.contains("\"genus\": 1"), "{topo}");
    assert!(topo.contains("\"chi\": 0"));
    for name in ["patch.off", "surface.off"] {
        let file = lawson_core::io::load_off(&dir.path().join(name)).unwrap();
        assert!(file.header.is_some());
        assert!(file.mesh.face_count() > 0);
    }
    let obj = lawson_core::io::load_obj(&dir.path().join("surface.obj")).unwrap();
    let off = lawson_core::io::load_off(&dir.path().join("surface.off")).unwrap();
    assert_eq!(obj.mesh, off.mesh);
    assert_eq!(off.mesh.euler_characteristic(), 0);
}

#[test]
fn spectrum_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = lawson(&[
            "spectrum",
            "--m",
            "2",
            "--k",
            "2",
            "--n",
            "8",
            "--eigs",
            "10",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stdout)
        );
    }
    for name in [
        "spectrum.csv",
        "spectrum.json",
        "nodal.json",
        "spectrum.svg",
        "eigenvectors.off",
    ] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
    let csv = read(a.path(), "spectrum.csv");
    assert!(csv.starts_with("index,lambda,residual\n"));
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "m = 3\nk = 1\n").unwrap();
    let out = lawson(&[
        "group-verify",
        "--config",
        cfg.to_str().unwrap(),
        "--k",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json = read(dir.path(), "group.json");
    assert!(
        json.contains("\"m\": 3") && json.contains("\"k\": 2"),
        "{json}"
    );
    assert!(json.contains("\"order\": 24"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = lawson(&[
        "build",
        "--m",
        "2",
        "--k",
        "2",
        "--n",
        "8",
        "--max-iterations",
        "1",
        "--tol",
        "1e-14",
        "--out",
        d,
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = lawson(&[
        "spectrum",
        "--m",
        "2",
        "--k",
        "2",
        "--n",
        "8",
        "--lambda-min",
        "2.5",
        "--lambda-max",
        "3",
        "--out",
        d,
    ]);
    assert_eq!(out.status.code(), Some(4));
    let out = lawson(&["group-verify", "--m", "0", "--k", "2", "--out", d]);
    assert_eq!(out.status.code(), Some(1));
    let out = lawson(&[
        "spectrum", "--m", "2", "--k", "2", "--n", "3", "--eigs", "500", "--out", d,
    ]);
    assert_eq!(out.status.code(), Some(4));
}
