use std::path::Path;
use std::process::{Command, Output};

const SMALL: [&str; 6] = ["--win-len", "256", "--hop", "128", "--iters", "20"];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bregman-pr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn without_wall_ms(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|line| {
            let mut fields: Vec<&str> = line.split(',').collect();
            fields.remove(10);
            fields.join(",")
        })
        .collect()
}

#[test]
fn bench_exact_prints_the_report() {
    let mut args = vec!["bench", "exact", "--synth", "chirp:1", "--algo", "GLA,G.QD.1,INIT"];
    args.extend(SMALL);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "input,algo,family,direction,d,iters,condition,sc,snr_db,snr_improvement_db,wall_ms,seed,diverged"
    );
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("chirp-1,G·QD·1,QD,-,1,20,exact,"));

    let again = run(&args);
    assert_eq!(without_wall_ms(&text), without_wall_ms(&stdout(&again)));
}

#[test]
fn bench_degrade_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let mut args = vec![
        "bench", "degrade", "--snr", "10,-20", "--synth", "multisine:2", "--algo", "GLA",
        "--out", out_dir, "--trace", "--wav",
    ];
    args.extend(SMALL);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).lines().count(), 3);
    for name in [
        "report.csv",
        "report.json",
        "multisine-2_10_GLA.trace.csv",
        "multisine-2_-20_GLA.wav",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let json = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(json.contains("\"version\"") && json.contains("\"rows\""));
}

#[test]
fn reconstruct_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("out.wav");
    let trace = dir.path().join("trace.csv");
    let mut args = vec![
        "reconstruct", "--synth", "multisine:3", "--algo", "GLA",
        "--out", wav.to_str().unwrap(), "--trace", trace.to_str().unwrap(),
    ];
    args.extend(SMALL);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_to_string(&trace).unwrap().starts_with("iteration,objective\n0,"));

    let out = run(&["metrics", wav.to_str().unwrap(), wav.to_str().unwrap(), "--win-len", "256", "--hop", "128"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let values: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(values[0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(values[1].parse::<f64>().unwrap(), 140.0);
}

#[test]
fn exit_codes() {
    let bad_code = run(&["bench", "exact", "--synth", "chirp", "--algo", "G.XX.1"]);
    assert_eq!(bad_code.status.code(), Some(2));

    let bad_flag = run(&["bench", "exact", "--bogus"]);
    assert_eq!(bad_flag.status.code(), Some(2));

    let no_input = run(&["bench", "exact", "--algo", "GLA"]);
    assert_eq!(no_input.status.code(), Some(2));

    let missing = Path::new("/definitely/not/here.wav");
    let io = run(&["bench", "exact", missing.to_str().unwrap(), "--algo", "GLA"]);
    assert_eq!(io.status.code(), Some(3));

    let mut args = vec!["bench", "exact", "--synth", "chirp:1", "--algo", "G.KL.L2", "--step", "1e3"];
    args.extend(SMALL);
    let diverged = run(&args);
    assert_eq!(diverged.status.code(), Some(4));
    assert!(stdout(&diverged).lines().nth(1).unwrap().ends_with(",true"));
}
