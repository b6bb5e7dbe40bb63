use std::fs;
use std::path::Path;
use std::process::Command;

use tempfile::TempDir;

fn run(cmd: &str, dir: &Path, config: &str) -> i32 {
    let path = dir.join("run.toml");
    fs::write(&path, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_iedd")).arg(cmd).arg(&path).output().unwrap();
    out.status.code().expect("terminated by signal")
}

fn read(path: impl AsRef<Path>) -> String {
    fs::read_to_string(path).unwrap()
}

const HOMOGENEOUS: &str = r#"
[model]
grid = { dims = [6, 5, 4], spacing = 0.5 }

[background]
sigma0 = 0.2
frequency = 20000.0

[source]
position = [-3.0, 0.0, 0.0]
moment = [0.0, 0.0, 1.0]

[[receivers]]
id = "near"
offset = [1.0, 0.0, 0.0]

[[receivers]]
id = "far"
position = [2.0, 0.5, 0.25]

[output]
directory = "out"
"#;

fn block_config(scheme: &str, extra: &str) -> String {
    format!(
        r#"
[model]
benchmark = "two_blocks"
scale = 0.125

[decomposition]
scheme = "{scheme}"
outer_tol = 1e-6
inner_tol = 1e-6
{extra}

[output]
directory = "out"
"#
    )
}

#[test]
fn zero_contrast_solve_returns_background() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run("solve", dir.path(), HOMOGENEOUS), 0);
    let out = dir.path().join("out");
    let residuals = read(out.join("residuals.csv"));
    let lines: Vec<&str> = residuals.lines().collect();
    assert_eq!(lines, ["sweep,subdomain,gmres_iters,inner_tol,full_residual", "0,,0,,0e0"]);

    let rx = read(out.join("receivers.csv"));
    assert_eq!(rx.lines().count(), 1 + 2 * 3);
    for line in rx.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!((f[5], f[6]), (f[8], f[9]), "{line}");
    }
    assert!(rx.lines().nth(1).unwrap().starts_with("near,-2,0,0,x,"));
    assert_eq!(fs::metadata(out.join("model.bin")).unwrap().len(), 72 + 120 * 48);
    assert_eq!(fs::metadata(out.join("field.bin")).unwrap().len(), 72 + 120 * 48);

    let report: serde_json::Value = serde_json::from_str(&read(out.join("report.json"))).unwrap();
    assert_eq!(report["converged"], true);
    assert_eq!(report["sweeps"], 0);
    assert_eq!(report["anomalous_cells"], 0);
}

#[test]
fn fixed_tolerance_sweeps_need_fewer_iterations_each_time() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run("solve", dir.path(), &block_config("gs_fixed", "")), 0);
    let residuals = read(dir.path().join("out/residuals.csv"));
    let mut per_sweep: Vec<usize> = Vec::new();
    let mut last = f64::INFINITY;
    for line in residuals.lines().skip(2) {
        let f: Vec<&str> = line.split(',').collect();
        let sweep: usize = f[0].parse().unwrap();
        if per_sweep.len() < sweep {
            per_sweep.push(0);
            let r: f64 = f[4].parse().unwrap();
            assert!(r < last);
            last = r;
        }
        per_sweep[sweep - 1] += f[2].parse::<usize>().unwrap();
    }
    assert!(last < 1e-6);
    assert!(per_sweep.len() >= 2, "{per_sweep:?}");
    assert!(per_sweep.windows(2).all(|w| w[1] < w[0]), "{per_sweep:?}");
}

#[test]
fn identical_configs_give_identical_outputs() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = block_config("gs_adaptive", "");
    assert_eq!(run("solve", a.path(), &cfg), 0);
    assert_eq!(run("solve", b.path(), &cfg), 0);
    for name in ["receivers.csv", "residuals.csv", "field.bin", "model.bin"] {
        let x = fs::read(a.path().join("out").join(name)).unwrap();
        let y = fs::read(b.path().join("out").join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn malformed_config_exits_one_and_writes_nothing() {
    for bad in [
        "[model\nbenchmark = 1",
        "[model]\nbenchmark = \"no_such_model\"\n[output]\ndirectory = \"out\"\n",
        &HOMOGENEOUS.replace("sigma0 = 0.2", "sigma0 = -0.2"),
        &HOMOGENEOUS.replace("[source]", "[source]\ncolor = 1"),
        &block_config("gs_fixed", "max_sweeps = 0"),
        &block_config("warp_drive", ""),
    ] {
        let dir = TempDir::new().unwrap();
        assert_eq!(run("solve", dir.path(), bad), 1, "{bad}");
        assert!(!dir.path().join("out").exists());
    }
}

#[test]
fn receiver_inside_anomaly_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = block_config("gs_adaptive", "")
        .replace("[decomposition]", "[[receivers]]\nid = \"inside\"\nposition = [0.0, 0.0, 0.5]\n\n[decomposition]");
    assert_eq!(run("solve", dir.path(), &cfg), 1);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn non_convergence_exits_two_and_keeps_the_history() {
    let dir = TempDir::new().unwrap();
    let cfg = block_config("gs_adaptive", "max_sweeps = 1").replace("outer_tol = 1e-6", "outer_tol = 1e-12");
    assert_eq!(run("solve", dir.path(), &cfg), 2);
    let residuals = read(dir.path().join("out/residuals.csv"));
    assert_eq!(residuals.lines().count(), 2 + 2);
}

#[test]
fn compare_writes_one_row_per_scheme() {
    let dir = TempDir::new().unwrap();
    let cfg = block_config("gs_adaptive", "schemes = [\"gs_fixed\", \"gs_adaptive\", \"jacobi_adaptive\"]");
    assert_eq!(run("compare", dir.path(), &cfg), 0);
    let out = dir.path().join("out");
    let table = read(out.join("comparison.csv"));
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), ["gs_fixed", "gs_adaptive", "jacobi_adaptive"]);
    assert_eq!(rows[0][1], "1e-6");
    assert_eq!(rows[1][1], "adaptive");
    assert!(rows.iter().all(|r| r[5] == "converged"));
    let sweeps = |r: &Vec<&str>| r[3].parse::<usize>().unwrap();
    assert!(sweeps(&rows[1]) <= sweeps(&rows[2]));
    for s in ["gs_fixed", "gs_adaptive", "jacobi_adaptive"] {
        assert!(out.join(format!("residuals_{s}.csv")).exists());
    }
}

#[test]
fn compare_with_one_scheme_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = block_config("gs_adaptive", "schemes = [\"gs_fixed\"]");
    assert_eq!(run("compare", dir.path(), &cfg), 1);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn failing_scheme_marks_its_row_and_exits_two() {
    let dir = TempDir::new().unwrap();
    let cfg = block_config("gs_adaptive", "schemes = [\"gs_fixed\", \"gs_adaptive\"]\nmax_sweeps = 1");
    assert_eq!(run("compare", dir.path(), &cfg), 2);
    let table = read(dir.path().join("out/comparison.csv"));
    assert!(table.lines().skip(1).any(|l| l.split(',').nth(5) == Some("failed")));
}

const LOG: &str = r#"
[model]
grid = { dims = [4, 4, 4], spacing = 50.0 }

[background]
sigma0 = 0.1

[decomposition]
outer_tol = 1e-3

[logsim]
trajectory = { start = [0.0, 0.0, 0.0], end = [10.0, 0.0, 0.0], station_spacing = 5.0 }
window = { extent = [9.0, 9.0, 16.0], cell_size = 1.0, boxes = 2 }
tool = { frequency = 24000.0, offsets = [3.0, 7.0] }

[output]
directory = "out"
"#;

#[test]
fn homogeneous_log_is_flat() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run("logsim", dir.path(), LOG), 0);
    let log = read(dir.path().join("out/log.csv"));
    let rows: Vec<Vec<String>> = log.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 3 * 2 * 3);
    for offset in ["3", "7"] {
        let zz: Vec<&str> = rows.iter().filter(|r| r[5] == offset && r[6] == "zz").map(|r| r[9].as_str()).collect();
        assert_eq!(zz.len(), 3);
        assert!(zz.iter().all(|v| *v == zz[0]), "{zz:?}");
    }
}

#[test]
fn single_station_log_has_one_row_per_receiver_component() {
    let dir = TempDir::new().unwrap();
    let cfg = LOG.replace("end = [10.0, 0.0, 0.0]", "end = [2.0, 0.0, 0.0]");
    assert_eq!(run("logsim", dir.path(), &cfg), 0);
    let log = read(dir.path().join("out/log.csv"));
    assert_eq!(log.lines().count(), 1 + 2 * 3);
    assert!(log.lines().skip(1).all(|l| l.starts_with("0,")));
}
