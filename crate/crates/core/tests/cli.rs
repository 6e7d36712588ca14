use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use straintail::asymptotics::ApproxReport;
use straintail::rare_event::{LocationHistogram, TailEstimate};

const CONSTANT: &str = "L=1\nsigma=0.5\nkernel.length_scale=0.2\nforcing.kind=constant\nforcing.p0=1\n";
const BUMP: &str = "L=1\nsigma=0.5\nkernel.length_scale=0.2\nforcing.kind=gaussian-bump\n\
                    forcing.base=0.2\nforcing.amplitude=1\nforcing.center=0.5\nforcing.width=0.15\n";

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_straintail"))
        .args(args)
        .arg("--config")
        .arg(config)
        .env("STRAINTAIL_THREADS", "2")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn approx_constant_has_no_interior_term() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.conf", &format!("{CONSTANT}b=1000\n"));
    let text = stdout(&run(&["approx"], &cfg));
    let report = ApproxReport::from_json(&text).unwrap();
    assert_eq!(report.term_interior, 0.0);
    assert!(report.u.is_none());
    assert!(report.total > 0.0 && report.total < 1.0);
    // repeated runs and a re-serialization are byte-identical
    assert_eq!(text, stdout(&run(&["approx"], &cfg)));
    assert_eq!(format!("{}\n", report.to_json()), text);
}

#[test]
fn approx_boundary_x_star_drops_interior_term() {
    let dir = tempfile::tempdir().unwrap();
    // cosine with its peak at x = 0: |p| is largest at the left end
    let text = "L=1\nsigma=0.5\nkernel.length_scale=0.2\nforcing.kind=cosine-bump\nforcing.base=0\n\
                forcing.amplitude=1\nforcing.center=0\nforcing.width=2\nb=1000\n";
    let cfg = write_config(dir.path(), "edge.conf", text);
    let report = ApproxReport::from_json(&stdout(&run(&["approx"], &cfg))).unwrap();
    assert_eq!(report.term_interior, 0.0);
    assert!(report.term_left > 0.0);
}

#[test]
fn approx_writes_to_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "b.conf", &format!("{BUMP}b=50\n"));
    let out = dir.path().join("report.json");
    let o = run(&["approx", "--out", out.to_str().unwrap()], &cfg);
    assert!(stdout(&o).is_empty());
    let report = ApproxReport::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(report.term_interior > 0.0);
}

#[test]
fn simulate_is_deterministic_and_dumps_paths() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("paths");
    let text = format!(
        "{CONSTANT}b=1.5\nn=3000\ngrid_n=64\nseed=4\ndump_paths=true\ndump_count=2\ndump_dir={}\n",
        dump.display()
    );
    let cfg = write_config(dir.path(), "s.conf", &text);
    let first = stdout(&run(&["simulate"], &cfg));
    let est: TailEstimate = serde_json::from_str(&first).unwrap();
    assert_eq!(est.n, 3000);
    assert!(est.p_hat > 0.0 && est.p_hat < 1.0);
    assert_eq!(first, stdout(&run(&["simulate"], &cfg)));
    for i in 0..2 {
        let path = std::fs::read_to_string(dump.join(format!("path_{i}.csv"))).unwrap();
        assert!(path.starts_with("x,xi\n"));
        assert_eq!(path.lines().count(), 66);
        let sol = std::fs::read_to_string(dump.join(format!("solution_{i}.csv"))).unwrap();
        assert!(sol.starts_with("x,v,v_prime\n"));
    }
    assert!(!dump.join("path_2.csv").exists());
}

#[test]
fn compare_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.conf", &format!("{CONSTANT}b_list=1.2,1.5\nn=2000\ngrid_n=64\n"));
    let text = stdout(&run(&["compare"], &cfg));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "b,method,p_hat,stderr,approx_total,term_interior,term_left,term_right,ratio");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1.2,tilted,"));
    let json = stdout(&run(&["compare", "--format", "json"], &cfg));
    assert!(json.trim_start().starts_with('['));
}

#[test]
fn locate_writes_bins_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "l.conf", &format!("{CONSTANT}b=1.5\nn=3000\ngrid_n=64\nbins=10\n"));
    let o = run(&["locate"], &cfg);
    let csv = stdout(&o);
    assert_eq!(csv.lines().count(), 11);
    let summary: LocationHistogram = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(summary.masses.len(), 10);
    let full = stdout(&run(&["locate", "--format", "json"], &cfg));
    assert_eq!(serde_json::from_str::<LocationHistogram>(&full).unwrap(), summary);
}

#[test]
fn kernel_info_reports_moments() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k.conf", CONSTANT);
    let v: serde_json::Value = serde_json::from_str(&stdout(&run(&["kernel-info"], &cfg))).unwrap();
    assert_eq!(v["family"], "squared-exponential");
    assert!((v["moments"]["delta"].as_f64().unwrap() - 25.0).abs() < 1e-9);
    assert!((v["moments"]["A"].as_f64().unwrap() - 1875.0).abs() < 1e-6);
    assert_eq!(v["assumptions_passed"], true);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |text: &str, args: &[&str]| {
        let cfg = write_config(dir.path(), "x.conf", text);
        run(args, &cfg).status.code().unwrap()
    };
    // config errors
    assert_eq!(code(&format!("{CONSTANT}b=3\nbogus=1\n"), &["approx"]), 2);
    assert_eq!(code(&format!("{CONSTANT}x_star=0.5\nb=3\n"), &["approx"]), 2);
    assert_eq!(code(CONSTANT, &["approx"]), 2);
    assert_eq!(code(&format!("{CONSTANT}b=3\n"), &["approx", "--format", "csv"]), 2);
    let missing = run(&["approx"], &dir.path().join("nope.conf"));
    assert_eq!(missing.status.code(), Some(2));
    // convex interior extremum: assumption violation
    let convex = "L=1\nsigma=0.5\nkernel.length_scale=0.2\nforcing.kind=gaussian-bump\nforcing.base=2\n\
                  forcing.amplitude=-1\nforcing.center=0.5\nforcing.width=0.1\nx_star=0.5\nb=3\n";
    assert_eq!(code(convex, &["approx"]), 3);
    // b far below the asymptotic regime: no bracket for the level equation
    assert_eq!(code(&format!("{CONSTANT}b=1e-6\n"), &["approx"]), 4);
}
