//! End-to-end tests of the `hyplat` binary: exit codes, diagnostics, and
//! byte-level determinism of the artifacts.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hyplat"))
}

fn out_dir(test: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hyplat-cli-{test}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn help_lists_every_subcommand() {
    let output = bin().arg("--help").output().unwrap();
    assert!(output.status.success());
    let text = stdout(&output);
    for sub in ["decay", "relax-sweep", "relax-table", "stability", "selftest"] {
        assert!(text.contains(sub), "--help must list '{sub}':\n{text}");
    }
}

#[test]
fn dump_config_round_trips_through_a_file() {
    let dir = out_dir("dump");
    let first = bin().arg("--dump-config").output().unwrap();
    assert!(first.status.success());
    let path = dir.join("effective.conf");
    fs::write(&path, &first.stdout).unwrap();
    let second = bin().arg("--config").arg(&path).arg("--dump-config").output().unwrap();
    assert!(second.status.success());
    assert_eq!(first.stdout, second.stdout, "dump -> parse -> dump must be a fixed point");
}

#[test]
fn malformed_config_exits_2_and_names_the_key() {
    let dir = out_dir("badkey");
    let path = dir.join("bad.conf");
    fs::write(&path, "grid.h=oops\n").unwrap();
    let output = bin().args(["decay", "--config"]).arg(&path).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("grid.h"), "{}", stderr(&output));

    fs::write(&path, "grid.depth=4\n").unwrap();
    let output = bin().args(["selftest", "--config"]).arg(&path).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("grid.depth"), "{}", stderr(&output));
}

#[test]
fn rank_deficient_system_exits_3() {
    let dir = out_dir("kalman");
    let path = dir.join("rank.conf");
    fs::write(&path, "system.builtin=\nsystem.a=1,0;0,1\nsystem.b=0,0;0,1\nsystem.n2=1\n")
        .unwrap();
    let output = bin()
        .args(["decay", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    assert!(
        stderr(&output).contains("Kalman rank 1 < 2"),
        "diagnostic must name the rank defect: {}",
        stderr(&output)
    );
}

#[test]
fn single_eps_sweep_exits_2() {
    let dir = out_dir("singleeps");
    let path = dir.join("single.conf");
    fs::write(&path, "relaxation.eps=0.03125\n").unwrap();
    let output = bin()
        .args(["relax-sweep", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("relaxation.eps"), "{}", stderr(&output));
}

#[test]
fn selftest_passes_on_the_default_grid() {
    let output = bin().args(["selftest", "--seed", "7"]).output().unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", stdout(&output));
    assert!(stdout(&output).contains("selftest: PASS"), "{}", stdout(&output));
}

#[test]
fn injected_fault_fails_the_named_suite() {
    let output =
        bin().args(["selftest", "--inject-fault", "partition-of-unity"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    let text = stdout(&output);
    assert!(text.contains("partition-of-unity: FAIL"), "{text}");
    assert!(text.contains("selftest: FAIL (partition-of-unity)"), "{text}");

    let output = bin().args(["selftest", "--inject-fault", "bogus"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn relax_table_artifacts_are_byte_identical_across_threads() {
    let dir_a = out_dir("det-a");
    let dir_b = out_dir("det-b");
    let path = dir_a.join("small.conf");
    fs::write(&path, "relaxation.h_list=0.0625,0.03125\n").unwrap();
    let run = |dir: &PathBuf, threads: &str| {
        let output = bin()
            .args(["relax-table", "--threads", threads, "--config"])
            .arg(&path)
            .arg("--out")
            .arg(dir)
            .output()
            .unwrap();
        assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
        fs::read(dir.join("relax_table.csv")).unwrap()
    };
    let csv_a = run(&dir_a, "1");
    let csv_b = run(&dir_b, "4");
    assert_eq!(csv_a, csv_b, "thread count must not change the bytes");
    let csv_a_again = run(&dir_a, "1");
    assert_eq!(csv_a, csv_a_again, "reruns must be byte-identical");
    let header = String::from_utf8(csv_a).unwrap();
    assert!(header.starts_with("eps,h,T,sup_besov,l1t_besov,darcy_besov,sup_linf,darcy_linf\n"));
}

#[test]
fn decay_run_writes_artifacts_and_exits_by_band() {
    let dir = out_dir("decay");
    let output = bin().arg("decay").arg("--out").arg(&dir).output().unwrap();
    let text = stdout(&output);
    let csv = fs::read_to_string(dir.join("decay.csv")).unwrap();
    assert!(csv.starts_with("t,norm_u2,norm_dhU,lyapunov\n"), "{}", &csv[..60.min(csv.len())]);
    let fit = fs::read_to_string(dir.join("decay_fit.txt")).unwrap();
    assert!(fit.starts_with("decay_rate="), "{fit}");
    // The exit code must agree with the reported slope: 0 inside the band,
    // 1 outside. The slope itself is asserted by the acceptance suite.
    let slope: f64 = fit
        .trim_start_matches("decay_rate=")
        .split('±')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    let expected = if (-0.55..=-0.45).contains(&slope) { 0 } else { 1 };
    assert_eq!(output.status.code(), Some(expected), "slope {slope}: {text}");
}

#[test]
fn relax_sweep_exit_code_matches_the_reported_orders() {
    let dir = out_dir("sweep");
    let output = bin().arg("relax-sweep").arg("--out").arg(&dir).output().unwrap();
    let report = fs::read_to_string(dir.join("relax_orders.txt")).unwrap();
    let slope_of = |name: &str| -> f64 {
        report
            .lines()
            .find(|l| l.starts_with(&format!("{name}=")))
            .unwrap_or_else(|| panic!("missing column {name} in:\n{report}"))
            .split('=')
            .nth(1)
            .unwrap()
            .split('±')
            .next()
            .unwrap()
            .parse()
            .unwrap()
    };
    let sup = slope_of("sup_linf");
    let darcy = slope_of("darcy_linf");
    let in_band = |s: f64| (1.9..=2.1).contains(&s);
    let expected = if in_band(sup) && in_band(darcy) { 0 } else { 1 };
    assert_eq!(
        output.status.code(),
        Some(expected),
        "sup={sup}, darcy={darcy}:\n{}",
        stdout(&output)
    );
    let csv = fs::read_to_string(dir.join("relax_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6, "header plus five records");
}

#[test]
fn stability_reports_the_trichotomy() {
    let dir = out_dir("stability");
    let output = bin().arg("stability").arg("--out").arg(&dir).output().unwrap();
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let report = fs::read_to_string(dir.join("stability.txt")).unwrap();
    let amp_of = |name: &str| -> f64 {
        report
            .lines()
            .find(|l| l.starts_with(name))
            .unwrap()
            .split("max_amplification=")
            .nth(1)
            .unwrap()
            .split(' ')
            .next()
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(amp_of("central") <= 1.0 + 1e-10, "{report}");
    // Both one-sided schemes are wrong-sided for one characteristic family
    // of the default pair, so both must amplify strongly.
    assert!(amp_of("forward") > 1e6, "{report}");
    assert!(amp_of("backward") > 1e6, "{report}");
}
