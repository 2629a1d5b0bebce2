use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use fastviz::update::UpdateApplier;

const TOY: &str = "\
# toy stream
100 a b 1.0
110 a c 2.0
120 b c d 1.5
130 e f 0.5
140 a b 1.0
150 g h 3.0
160 c d 1.0
170 a e 2.0
180 b d 0.5
190 a b c 1.0
";

fn fastviz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fastviz"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fastviz_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_fastviz"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn summary(out: &Output) -> serde_json::Value {
    let err = String::from_utf8_lossy(&out.stderr);
    let line = err.lines().last().expect("summary line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{e}: {err}"))
}

const SMALL: [&str; 10] = [
    "--buffer-capacity",
    "4",
    "--visual-capacity",
    "2",
    "--forgetting-period",
    "20",
    "--time-contraction",
    "300",
    "--edge-threshold",
    "0.1",
];

#[test]
fn filter_toy_stream_replays() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "toy.txt", TOY);
    let updates = dir.path().join("updates.json");
    let mut args = vec!["filter", "--input", &input, "--updates-out", updates.to_str().unwrap()];
    args.extend(SMALL);
    let out = fastviz(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out);
    assert_eq!(s["events_accepted"], 10);
    assert_eq!(s["pairs"], 14);
    // one frame every 10 s from t=100 up to t=190, plus the final one
    assert_eq!(s["updates_emitted"], 10);

    let text = fs::read_to_string(&updates).unwrap();
    let mut applier = UpdateApplier::new();
    let mut frames = 0;
    for line in text.lines() {
        if applier.apply_line(line).unwrap() {
            frames += 1;
            assert!(applier.graph().node_count() <= 2);
        }
    }
    assert_eq!(frames, 10);
    assert!(text.lines().last().unwrap().starts_with(r#"{"lb":"#));
    assert_eq!(applier.caption(), Some("1970-01-01 00:03"));
    // a-b carries 1 + 1 + 1 with two forgetting rounds in between
    assert!(applier.graph().contains_node("a"));
}

#[test]
fn filter_reads_stdin_and_writes_stdout() {
    let mut args = vec!["filter"];
    args.extend(SMALL);
    let a = fastviz_stdin(&args, TOY);
    assert!(a.status.success());
    let b = fastviz_stdin(&args, TOY);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn empty_stream_emits_nothing() {
    let out = fastviz_stdin(&["filter"], "# nothing\n\n");
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(summary(&out)["updates_emitted"], 0);
}

#[test]
fn compare_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "toy.txt", TOY);
    let mut digests = Vec::new();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let m = dir.path().join(format!("m{run}.csv"));
        let j = dir.path().join(format!("j{run}.csv"));
        let mut args = vec![
            "compare",
            "--input",
            &input,
            "--metrics-out",
            m.to_str().unwrap(),
            "--jaccard-out",
            j.to_str().unwrap(),
        ];
        args.extend(SMALL);
        let out = fastviz(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let s = summary(&out);
        let samples = s["samples"].as_u64().unwrap();
        assert_eq!(samples, 10);
        let m = fs::read_to_string(m).unwrap();
        let j = fs::read_to_string(j).unwrap();
        assert_eq!(m.lines().count() as u64, 1 + 8 * samples);
        assert_eq!(j.lines().count() as u64, 1 + 4 * samples);
        assert!(m.starts_with("time,filter,level,"));
        digests.push(s["pair_digest"].clone());
        outputs.push((m, j));
    }
    assert_eq!(digests[0], digests[1]);
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn synth_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "spec.json",
        r#"{"duration": 600, "base_rate": 2.0, "vocabulary_size": 100, "clique_size": [2, 4],
            "bursts": [{"start": 200, "end": 300, "rate_multiplier": 5.0, "vocabulary_shift": 0.5}],
            "seed": 4}"#,
    );
    let run = |extra: &[&str]| {
        let mut args = vec!["synth", "--spec", &spec];
        args.extend(extra);
        let out = fastviz(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out.stdout
    };
    let a = run(&[]);
    assert_eq!(a, run(&[]));
    assert_ne!(a, run(&["--seed", "5"]));
    // the synthetic stream is valid filter input
    let out = fastviz_stdin(&["filter"], std::str::from_utf8(&a).unwrap());
    assert!(out.status.success());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "toy.txt", TOY);
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"buffer_capacity": 3, "visual_capacity": 1, "forgetting_period": 20,
            "time_contraction": 300, "edge_threshold": 0.1}"#,
    );
    let out = fastviz(&["filter", "--input", &input, "--config", &cfg]);
    assert!(out.status.success());
    let mut applier = UpdateApplier::new();
    for line in String::from_utf8(out.stdout).unwrap().lines() {
        if applier.apply_line(line).unwrap() {
            assert!(applier.graph().node_count() <= 1);
        }
    }
    let out = fastviz(&["filter", "--input", &input, "--config", &cfg, "--visual-capacity", "3"]);
    assert!(out.status.success());
    let mut applier = UpdateApplier::new();
    let mut widest = 0;
    for line in String::from_utf8(out.stdout).unwrap().lines() {
        applier.apply_line(line).unwrap();
        widest = widest.max(applier.graph().node_count());
    }
    assert!(widest > 1);

    let bad = write(dir.path(), "bad.json", r#"{"buffer_size": 3}"#);
    assert_eq!(fastviz(&["filter", "--input", &input, "--config", &bad]).status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let malformed = write(dir.path(), "bad.txt", "1 a b 1\n2 a\n3 b c 1\n");
    let disordered = write(dir.path(), "order.txt", "5 a b 1\n3 b c 1\n");
    let good = write(dir.path(), "good.txt", TOY);

    let out = fastviz(&["filter", "--input", &malformed]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert_eq!(fastviz(&["filter", "--input", &disordered]).status.code(), Some(3));

    let out = fastviz(&["filter", "--input", &malformed, "--lenient"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary(&out)["malformed"], 1);
    let out = fastviz(&["filter", "--input", &disordered, "--lenient"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary(&out)["out_of_order"], 1);

    let missing = dir.path().join("missing.txt");
    assert_eq!(fastviz(&["filter", "--input", missing.to_str().unwrap()]).status.code(), Some(4));
    assert_eq!(
        fastviz(&["filter", "--input", &good, "--forgetting-factor", "1.5"]).status.code(),
        Some(2)
    );
    assert_eq!(
        fastviz(&["filter", "--input", &good, "--buffer-capacity", "1"]).status.code(),
        Some(2)
    );
    assert_eq!(fastviz(&["filter", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(fastviz(&[]).status.code(), Some(2));
    let unwritable = dir.path().join("no/such/dir/out.json");
    assert_eq!(
        fastviz(&["filter", "--input", &good, "--updates-out", unwritable.to_str().unwrap()])
            .status
            .code(),
        Some(4)
    );
}
