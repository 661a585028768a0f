use std::process::{Command, Output};

fn maxsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maxsim")).args(args).output().expect("run maxsim")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "maxsim failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Header row and data rows, comments dropped.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let head = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (head, rows)
}

const BR: [&str; 8] = ["--model", "br", "--alpha", "1", "--v", "1", "--grid", "-1:1:9"];

#[test]
fn simulate_writes_one_row_per_replication() {
    let mut args = vec!["simulate"];
    args.extend(BR);
    args.extend(["--method", "dm", "--reps", "25", "--seed", "11"]);
    let text = stdout(&maxsim(&args));
    assert!(text.starts_with("# maxsim "));
    assert!(text.contains("# seed: 11"));
    let (head, rows) = table(&text);
    assert_eq!(head.len(), 9 + 3);
    assert_eq!(head[9..], ["T", "N_W", "exact"]);
    assert_eq!(rows.len(), 25);
    for r in &rows {
        assert_eq!(r[11], "true");
        assert!(r[..9].iter().all(|z| z.parse::<f64>().unwrap() > 0.0));
    }
}

#[test]
fn inexact_threshold_is_flagged() {
    let mut args = vec!["simulate"];
    args.extend(BR);
    args.extend(["--method", "dm", "--tau", "0.5N", "--reps", "10", "--seed", "1"]);
    let (_, rows) = table(&stdout(&maxsim(&args)));
    assert!(rows.iter().all(|r| r[11] == "false"));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let mut args = vec!["simulate"];
    args.extend(BR);
    args.extend(["--method", "sn", "--reps", "40", "--seed", "5"]);
    let a = stdout(&maxsim(&args));
    args.extend(["--threads", "1"]);
    let b = stdout(&maxsim(&args));
    assert_eq!(a, b);
}

#[test]
fn missing_seed_is_recorded_in_the_header() {
    let mut args = vec!["theta"];
    args.extend(BR);
    args.extend(["--reps", "500"]);
    let text = stdout(&maxsim(&args));
    let seed_line = text.lines().find(|l| l.starts_with("# seed: ")).unwrap();
    let seed = seed_line.trim_start_matches("# seed: ");
    let command = text.lines().find(|l| l.starts_with("# command: ")).unwrap();
    assert!(command.ends_with(&format!("--seed {seed}")));
    let mut again = args.clone();
    again.extend(["--seed", seed]);
    let (_, a) = table(&text);
    let (_, b) = table(&stdout(&maxsim(&again)));
    assert_eq!(a, b);
}

#[test]
fn assess_error_writes_a_row_per_error_size() {
    let mut args = vec!["assess-error"];
    args.extend(BR);
    args.extend(["--method", "dm", "--tau", "0.5N", "--eps", "0.1,0.5,1", "--reps", "200", "--seed", "3"]);
    let (head, rows) = table(&stdout(&maxsim(&args)));
    assert_eq!(rows.len(), 3);
    let col = |name: &str| head.iter().position(|h| h == name).unwrap();
    assert!(rows.iter().all(|r| r[col("mode")] == "continuation"));
    let p: Vec<f64> = rows.iter().map(|r| r[col("p_abs")].parse().unwrap()).collect();
    assert!(p[0] >= p[1] && p[1] >= p[2]);
}

#[test]
fn bench_writes_the_results_schema() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.toml");
    std::fs::write(
        &file,
        "grid = \"-1:1:7\"\nreps = 150\nmethods = [\"dm\", \"ef\"]\ntargets = [0.0, 0.1]\n\
         [x]\nmodel = \"et\"\nnu = 2\ns = 0.5\n",
    )
    .unwrap();
    let out = dir.path().join("out.csv");
    let o = maxsim(&["bench", "--scenarios", file.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (head, rows) = table(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(head.len(), 16);
    assert_eq!(head[0], "scenario_id");
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r[1] == "extremal-t"));
}

#[test]
fn bad_arguments_exit_with_two() {
    let mut args = vec!["simulate"];
    args.extend(["--model", "br", "--alpha", "2.5", "--v", "1", "--method", "dm", "--reps", "5"]);
    assert_eq!(maxsim(&args).status.code(), Some(2));
    assert_eq!(maxsim(&["simulate", "--model", "br"]).status.code(), Some(2));
    let mut args = vec!["simulate"];
    args.extend(BR);
    args.extend(["--method", "original", "--reps", "5"]);
    assert_eq!(maxsim(&args).status.code(), Some(2), "original needs --tau");
    let mut args = vec!["simulate"];
    args.extend(["--model", "et", "--nu", "2", "--s", "1", "--method", "minvar", "--tau", "2"]);
    assert_eq!(maxsim(&args).status.code(), Some(2));
}

#[test]
fn run_time_failures_exit_with_one() {
    let o = maxsim(&["bench", "--scenarios", "/nonexistent/scenarios.toml"]);
    assert_eq!(o.status.code(), Some(1));
}
