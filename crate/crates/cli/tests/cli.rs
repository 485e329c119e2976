use std::path::Path;
use std::process::{Command, Output};

use vtkio::model::{Attribute, DataSet, Vtk};

fn mfmfe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfmfe")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary_value(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap()
        .parse()
        .unwrap()
}

fn history_rows(dir: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(dir.join("history.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

/// Parses a legacy VTK file and returns (points, cells, cell attribute names).
fn parse_vtk(path: &Path) -> (usize, usize, Vec<String>) {
    let vtk = Vtk::import(path).unwrap_or_else(|e| panic!("{}: {e:?}", path.display()));
    let DataSet::UnstructuredGrid { pieces, .. } = vtk.data else {
        panic!("not an unstructured grid")
    };
    let piece = pieces[0].load_piece_data(None).unwrap();
    let names = piece
        .data
        .cell
        .iter()
        .map(|a| match a {
            Attribute::DataArray(d) => d.name.clone(),
            Attribute::Field { name, .. } => name.clone(),
        })
        .collect();
    (piece.num_points(), piece.cells.types.len(), names)
}

#[test]
fn constant_patch_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfmfe(&["solve", "--problem", "constant_patch", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let line = stdout(&out);
    assert!(summary_value(&line, "err_u") <= 1e-10, "{line}");
    assert!(summary_value(&line, "eta_total") <= 1e-9, "{line}");
}

#[test]
fn solve_on_refined_mesh_emits_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = mfmfe(&["solve", "--problem", "example71_r04", "--uniform-levels", "3", "--out", d.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["meshes/mesh_0000.vtk", "solutions/sol_0000.vtk", "reports/report_0000.csv", "history.csv", "manifest"] {
        assert!(d.join(f).is_file(), "missing {f}");
    }
    let rows = history_rows(d);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][1], "48");
    let (points, cells, names) = parse_vtk(&d.join("solutions/sol_0000.vtk"));
    assert_eq!(cells, 48);
    assert!(points > 0);
    assert_eq!(names, ["pressure", "velocity", "eta_sq"]);
    let (_, cells, _) = parse_vtk(&d.join("meshes/mesh_0000.vtk"));
    assert_eq!(cells, 48);
    let report = std::fs::read_to_string(d.join("reports/report_0000.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 48 + 1);
}

#[test]
fn example72_starts_from_eight_triangles() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfmfe(&["solve", "--problem", "example72", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(summary_value(&stdout(&out), "N"), 8.0);
}

#[test]
fn adaptive_run_history_and_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = mfmfe(&["adapt", "--problem", "example71_r04", "--max-iterations", "12", "--out", d.path().to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let rows = history_rows(a.path());
    assert_eq!(rows.len(), 12);
    let n: Vec<usize> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(n.windows(2).all(|w| w[1] > w[0]), "{n:?}");
    for f in ["history.csv", "meshes/mesh_0011.vtk", "solutions/sol_0011.vtk", "reports/report_0011.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between identical runs");
    }
    let (_, cells, _) = parse_vtk(&a.path().join("meshes/mesh_0011.vtk"));
    assert_eq!(cells, n[11]);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out_dir = dir.path().join("out");
    std::fs::write(
        &cfg,
        format!(
            "problem = \"example71_r01\"\nmode = \"uniform\"\nmax_iterations = 2\noutput = {:?}\n",
            out_dir.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = mfmfe(&["adapt", "--config", cfg.to_str().unwrap(), "--max-iterations", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = history_rows(&out_dir);
    let n: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(n, ["6", "12", "24"]);
    let manifest = std::fs::read_to_string(out_dir.join("manifest")).unwrap();
    assert!(manifest.contains("problem = \"example71_r01\""));
    assert!(manifest.contains("max_iterations = 3"));
}

#[test]
fn mixed_exact_solver_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfmfe(&["solve", "--problem", "linear_patch", "--solver", "mixed_exact", "--uniform-levels", "1", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(summary_value(&stdout(&out), "err_u") <= 1e-10);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "theta = 0.5\nmarking = \"max\"\n").unwrap();
    let out = mfmfe(&["adapt", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("marking"), "{}", stderr(&out));

    let out = mfmfe(&["solve", "--theta", "1.5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("theta"));

    let out = mfmfe(&["solve", "--problem", "example99", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("problem"));

    let out = Command::new(env!("CARGO_BIN_EXE_mfmfe"))
        .args(["verify"])
        .env("MFMFE_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(mfmfe(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mfmfe(&["solve", "--theta"]).status.code(), Some(1));
    assert_eq!(mfmfe(&[]).status.code(), Some(1));
    assert_eq!(mfmfe(&["--help"]).status.code(), Some(0));
}

#[test]
fn verify_passes_with_one_line_per_audit() {
    let out = Command::new(env!("CARGO_BIN_EXE_mfmfe"))
        .arg("verify")
        .env("MFMFE_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}{}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.iter().all(|l| l.starts_with("audit ") && l.contains(": PASS")), "{text}");
    for id in ["sigma-exactness", "postprocess-continuity", "marking-minimality", "system-structure"] {
        assert!(text.contains(&format!("audit {id}: PASS")), "{text}");
    }
}
