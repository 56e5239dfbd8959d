use std::path::PathBuf;
use std::process::Command;

use divdiv_plate::mesh::load_mesh;

fn plate(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_plate")).args(args).output().unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("plate-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn uniform_csv_is_byte_stable() {
    let (a, b) = (scratch("a"), scratch("b"));
    for d in [&a, &b] {
        let o = plate(&["run", "uniform", "--problem", "jump_square", "--levels", "2", "--out", d.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |d: &PathBuf| std::fs::read(d.join("jump_square_uniform.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let text = String::from_utf8(read(&a)).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().ends_with(",nan"));
}

#[test]
fn adaptive_mesh_reloads() {
    let d = scratch("adaptive");
    let out = d.to_str().unwrap();
    let o = plate(&["run", "adaptive", "--problem", "lshape_simply_supported", "--max-iter", "3", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mesh_path = d.join("lshape_simply_supported_final.mesh");
    let m = load_mesh(&std::fs::read_to_string(&mesh_path).unwrap()).unwrap();
    assert!(m.num_triangles() > 6);
    let o = plate(&["run", "uniform", "--problem", "lshape_simply_supported", "--mesh", mesh_path.to_str().unwrap(), "--levels", "1", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.join("lshape_simply_supported_uniform.csv")).unwrap();
    let ntri: usize = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(ntri, m.num_triangles());
}

#[test]
fn verify_passes_and_writes_reports() {
    let d = scratch("verify");
    let o = plate(&["verify", "--problem", "lshape_clamped_corner", "--out", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(std::fs::read_to_string(d.join("verify.csv")).unwrap().lines().count() > 5);
}

#[test]
fn exit_codes() {
    assert_eq!(plate(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(plate(&["run", "uniform", "--k", "2"]).status.code(), Some(1));
    assert_eq!(plate(&["run", "uniform", "--mesh", "/nonexistent/m.mesh"]).status.code(), Some(1));
    let bad = scratch("bad");
    std::fs::create_dir_all(&bad).unwrap();
    let cfg = bad.join("c.cfg");
    std::fs::write(&cfg, "levels\n").unwrap();
    assert_eq!(plate(&["--config", cfg.to_str().unwrap(), "run", "uniform"]).status.code(), Some(1));
}
