use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const MARKET: [&str; 10] = ["--mu", "0.1", "--sigma", "0.15", "--c", "1", "--b", "1", "--lambda", "0.04"];

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("robust-ruin-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(sub: &str, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-ruin"))
        .arg(sub)
        .args(MARKET)
        .args(extra)
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|f| {
                    assert!((f.contains('e') || f == "NaN") && !f.contains(' '), "field {f}");
                    f.parse().unwrap()
                })
                .collect()
        })
        .collect();
    (header, rows)
}

#[test]
fn solve_writes_the_profile() {
    let out = scratch("solve.csv");
    let o = run("solve", &["--r", "0.06", "--eps", "5", "--grid-n", "201", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, "w,psi,dpsi,pi_star,theta_star,sharpe_distorted");
    assert_eq!(rows.len(), 201);
    assert_eq!(rows[0][1], 1.0);
    assert_eq!(rows[200][1], 0.0);
    assert!(rows.windows(2).all(|r| r[1][1] <= r[0][1]));
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.contains("residual_sup=") && report.contains("iterations="));
}

#[test]
fn limiting_ambiguity_levels() {
    let out = scratch("inf.csv");
    let o = run("solve", &["--r", "0.02", "--eps", "inf", "--grid-n", "101", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let (_, rows) = read_csv(&out);
    assert!(rows.iter().all(|r| r[3] == 0.0 && r[4] == 0.0));

    let out = scratch("zero.csv");
    let o = run("solve", &["--r", "0.02", "--eps", "0", "--grid-n", "101", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let (_, rows) = read_csv(&out);
    assert!(rows.iter().all(|r| r[4] == 0.0));
    assert!(rows[..100].iter().all(|r| r[3] > 0.0));
}

#[test]
fn reruns_are_byte_identical() {
    let a = scratch("mc-a.csv");
    let b = scratch("mc-b.csv");
    let common = ["--r", "0.06", "--eps", "5", "--w0-list", "5,10", "--n-paths", "300", "--dt", "0.01", "--grid-n", "401"];
    let o = run("mc-verify", &[&common[..], &["--workers", "1", "--out", a.to_str().unwrap()]].concat());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run("mc-verify", &[&common[..], &["--workers", "3", "--out", b.to_str().unwrap()]].concat());
    assert!(o.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let (header, rows) = read_csv(&a);
    assert_eq!(header, "w0,psi,mean,std_error,fraction_safe_hit,pass");
    assert_eq!(rows.len(), 2);

    let t1 = scratch("t1.csv");
    let t2 = scratch("t2.csv");
    for t in [&t1, &t2] {
        let o = run("table1", &["--r-list", "0.06", "--eps-list", "1,5", "--grid-n", "201", "--out", t.to_str().unwrap()]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&t1).unwrap(), std::fs::read(&t2).unwrap());
    let (header, rows) = read_csv(&t1);
    assert_eq!(header, "r,eps,max_deviation");
    assert!(rows[0][2] <= rows[1][2]);
}

#[test]
fn expansion_check_reports_error_ratios() {
    let out = scratch("expand.csv");
    let o = run("expand-check", &["--r", "0.06", "--eps-list", "0.2,0.1", "--grid-n", "401", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let (header, rows) = read_csv(&out);
    assert_eq!(header, "eps,max_error,ratio");
    assert!(rows[0][2].is_nan());
    assert!(rows[1][2] < 0.35);
}

#[test]
fn exit_codes() {
    let out = scratch("bad.csv");
    let out = out.to_str().unwrap();
    let code = |o: Output| o.status.code().unwrap();
    assert_eq!(code(run("solve", &["--r", "0.2", "--eps", "1", "--out", out])), 2);
    assert_eq!(code(run("solve", &["--r", "0.06", "--eps", "-1", "--out", out])), 2);
    assert_eq!(code(run("solve", &["--r", "0.06", "--out", out])), 2);
    assert_eq!(code(run("expand-check", &["--r", "0.06", "--eps-list", "0.1"])), 2);
    assert_eq!(code(run("table1", &["--eps-list", "0,1", "--out", out])), 2);
    let missing_dir = scratch("no-such-dir").join("x.csv");
    let o = run("solve", &["--r", "0.06", "--eps", "1", "--grid-n", "101", "--out", missing_dir.to_str().unwrap()]);
    assert_eq!(code(o), 1);
}
