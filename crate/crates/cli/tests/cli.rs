use std::path::Path;
use std::process::{Command, Output};

fn palqo(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_palqo"))
        .args(args)
        .env("PALQO_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn config(dir: &Path, extra: &str) -> std::path::PathBuf {
    let text = format!(
        r#"method = "vanilla"
seeds = [0, 1]
output_dir = "run"

[hamiltonian]
builder = "tfim"
n = 2
j = 1.0
h = 1.0

[ansatz]
kind = "hea"
layers = 2

[vqe]
eta = 0.1
max_iters = 400
{extra}
"#
    );
    let path = dir.join("exp.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn shots_estimate() {
    let tmp = tempfile::tempdir().unwrap();
    let o = palqo(&["shots", "120", "39", "1e-3", "1"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "9360000000");
    let o = palqo(&["shots", "2", "1", "0.5", "3"], tmp.path());
    assert_eq!(stdout(&o).trim(), "48");
}

#[test]
fn exact_from_builder_and_file() {
    let tmp = tempfile::tempdir().unwrap();
    let o = palqo(&["exact", "tfim:2,1,1"], tmp.path());
    let e: f64 = stdout(&o).trim().parse().unwrap();
    assert!((e + 5f64.sqrt()).abs() < 1e-10);

    let f = tmp.path().join("h.txt");
    std::fs::write(&f, "# single qubit\n-1.0 Z\n0.5 I\n").unwrap();
    let o = palqo(&["exact", f.to_str().unwrap()], tmp.path());
    let e: f64 = stdout(&o).trim().parse().unwrap();
    assert!((e + 0.5).abs() < 1e-12);

    let o = palqo(&["exact", "ising:2,1"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn vqe_run_writes_artifacts_under_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "");
    let root = tmp.path().join("root");
    let o = palqo(&["vqe", cfg.to_str().unwrap()], &root);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let run = root.join("run");
    for f in ["metrics.json", "timing.json", "plot.csv", "seed_0/vanilla.csv", "seed_1/vanilla.csv"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let csv = std::fs::read_to_string(run.join("seed_0/vanilla.csv")).unwrap();
    assert!(csv.starts_with("step,t_scaled,energy,theta_0,"));

    let first = std::fs::read(run.join("metrics.json")).unwrap();
    let o = palqo(&["vqe", cfg.to_str().unwrap()], &root);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(run.join("metrics.json")).unwrap(), first);

    let o = palqo(&["compare", run.join("metrics.json").to_str().unwrap()], &root);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("vanilla"));
}

#[test]
fn non_convergence_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "").to_str().unwrap().to_string();
    std::fs::write(&cfg, std::fs::read_to_string(&cfg).unwrap().replace("max_iters = 400", "max_iters = 2")).unwrap();
    let o = palqo(&["vqe", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn validation_errors_leave_no_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("root");
    let cfg = config(tmp.path(), "");
    let text = std::fs::read_to_string(&cfg).unwrap();
    std::fs::write(&cfg, text.replace("builder = \"tfim\"", "file = \"missing.txt\"")).unwrap();
    let o = palqo(&["palqo", cfg.to_str().unwrap()], &root);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.txt"));
    assert!(!root.exists());

    let cfg = config(tmp.path(), "colour = 1");
    let o = palqo(&["vqe", cfg.to_str().unwrap()], &root);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    assert!(!root.exists());
}

#[test]
fn dmd_and_palqo_emit_source_column() {
    let tmp = tempfile::tempdir().unwrap();
    let extra = "\n[pinn]\nwidth = 6\nepochs = 20\n\n[palqo]\nmax_cycles = 2\nrollout_max_steps = 10\n\n[dmd]\nmax_cycles = 2\n";
    let cfg = config(tmp.path(), extra);
    for (cmd, file) in [("palqo", "palqo.csv"), ("dmd", "dmd.csv")] {
        let o = palqo(&[cmd, cfg.to_str().unwrap()], tmp.path());
        assert!(matches!(o.status.code(), Some(0) | Some(3)), "{}", String::from_utf8_lossy(&o.stderr));
        let csv = std::fs::read_to_string(tmp.path().join("run/seed_1").join(file)).unwrap();
        assert!(csv.lines().next().unwrap().ends_with(",source"));
        assert!(csv.contains(",restart"));
    }
}
