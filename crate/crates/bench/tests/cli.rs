use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snn-bench")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const XOR: &str = "experiment = xor-timing\nname = xor\nseed = 3\nmax_iterations = 40\n";

#[test]
fn run_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "xor.cfg", XOR);
    let out = dir.path().join("r.csv");
    let o = bench(&["run", &cfg, "--trials", "3", "--out", out.to_str().unwrap(), "--workers", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "experiment,trial,seed,converged,iterations,final_error,train_acc,test_acc");
    assert_eq!(lines.len(), 5);
    for (i, l) in lines[1..4].iter().enumerate() {
        assert!(l.starts_with(&format!("xor,{i},")), "{l}");
        let iterations: usize = l.split(',').nth(4).unwrap().parse().unwrap();
        assert!(iterations <= 40);
    }
    assert!(lines[4].starts_with("# summary xor: trials=3"));
}

#[test]
fn sweep_names_each_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "xor.cfg", XOR);
    let o = bench(&["sweep", &cfg, "--param", "sub_connections", "--values", "4,6", "--trials", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("xor[sub_connections=4],0,"));
    assert!(text.contains("xor[sub_connections=6],0,"));
    assert_eq!(text.lines().filter(|l| l.starts_with("experiment,")).count(), 1);
}

#[test]
fn dry_run_reports_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.cfg", "experiment = generalise\ninput_jitter = 2\n");
    let o = bench(&["run", &cfg, "--dry-run", "--paper-scale"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("50 trials"), "{text}");
    assert!(text.contains("averaged per pattern < 0.6"));
    assert!(text.contains("accuracy >= 80% on 30 fresh noisy patterns"));
}

#[test]
fn save_trace_and_noise_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "xor.cfg", "experiment = xor-timing\nname = xor\nseed = 11\n");
    let save = dir.path().join("nets");
    let trace = dir.path().join("trace.csv");
    let o = bench(&[
        "run",
        &cfg,
        "--trials",
        "1",
        "--save",
        save.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = stdout(&o);
    let iterations: usize = rows.lines().nth(1).unwrap().split(',').nth(4).unwrap().parse().unwrap();

    let curve = fs::read_to_string(&trace).unwrap();
    let last = curve.lines().last().unwrap();
    assert_eq!(curve.lines().count(), iterations + 1);
    assert!(last.ends_with(",0.000000"), "distance to final weights at the end: {last}");

    let ckpt = save.join("xor_trial_0.ckpt");
    let pats = save.join("xor_trial_0.patterns");
    let o = bench(&["noise-eval", ckpt.to_str().unwrap(), pats.to_str().unwrap(), "--sigma-range", "0:2", "--count", "40"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = stdout(&o);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines, ["sigma,accuracy", lines[1], lines[2], lines[3]]);
    assert!(lines[1].starts_with("0,"));
}

#[test]
fn converged_or_not_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "xor.cfg", "experiment = xor-timing\nmax_iterations = 1\n");
    let o = bench(&["run", &cfg, "--trials", "2"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains(",false,1,"));
}

#[test]
fn configuration_and_io_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = write(dir.path(), "a.cfg", "experiment = xor-timing\nlearning_rate = 3\n");
    let bad_value = write(dir.path(), "b.cfg", "experiment = xor-timing\nhidden = five\n");
    let bad_sweep = write(dir.path(), "c.cfg", XOR);
    let missing_iris = write(dir.path(), "d.cfg", "experiment = iris\niris_path = nowhere.csv\n");
    for args in [
        vec!["run", bad_key.as_str()],
        vec!["run", bad_value.as_str()],
        vec!["run", "/no/such/file.cfg"],
        vec!["sweep", bad_sweep.as_str(), "--param", "colour", "--values", "1"],
        vec!["run", missing_iris.as_str(), "--trials", "1"],
        vec!["noise-eval", "/no/such.ckpt", "/no/such.patterns"],
    ] {
        let o = bench(&args);
        assert!(!o.status.success(), "{args:?} succeeded");
        assert!(String::from_utf8_lossy(&o.stderr).contains("error: "), "{args:?}");
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let o = bench(&["run", path.to_str().unwrap(), "--dry-run"]);
        assert!(o.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
        n += 1;
    }
    assert!(n >= 11);
}
