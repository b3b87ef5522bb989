use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sblabel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sblabel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path) -> std::path::PathBuf {
    let out = sblabel(&[
        "synth",
        "--seed",
        "4",
        "--auctions",
        "40",
        "--output-dir",
        p(dir),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    dir.join("bids.csv")
}

#[test]
fn staged_run_matches_one_shot_run() {
    let tmp = tempfile::tempdir().unwrap();
    let bids = synth(tmp.path());

    let staged = tmp.path().join("staged");
    let s = p(&staged);
    let steps: Vec<Vec<&str>> = vec![
        vec!["ingest", "--input", p(&bids), "--output-dir", s],
        vec!["features", "--output-dir", s],
        vec!["partition", "--output-dir", s],
        vec!["optk", "--output-dir", s, "--seed", "9", "--k-max", "6"],
        vec!["sweep", "--output-dir", s, "--seed", "9", "--k-max", "6"],
        vec!["cluster", "--output-dir", s, "--seed", "9", "--k-max", "6"],
        vec!["label", "--output-dir", s],
        vec!["report", "--output-dir", s],
    ];
    for step in &steps {
        let out = sblabel(step);
        assert_eq!(code(&out), 0, "{step:?}: {}", stderr(&out));
    }

    let whole = tmp.path().join("whole");
    let out = sblabel(&[
        "run",
        "--input",
        p(&bids),
        "--output-dir",
        p(&whole),
        "--seed",
        "9",
        "--k-max",
        "6",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("partition,auctions,instances,clusters,rp,alpha,normal,suspicious"));
    assert!(stdout.lines().last().unwrap().starts_with("total,40,"));

    for name in [
        "labeled.csv",
        "summary.csv",
        "stats.csv",
        "report/sweep_table.csv",
        "report/summary_table.csv",
    ] {
        assert_eq!(
            fs::read(staged.join(name)).unwrap(),
            fs::read(whole.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn config_file_with_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let bids = synth(tmp.path());
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "input = {:?}\noutput_dir = {:?}\nseed = 1\n\n[optk]\nk_max = 4\n\n[cure]\nreps = [4]\nalphas = [0.2]\n",
            p(&bids),
            p(&tmp.path().join("from_config")),
        ),
    )
    .unwrap();
    let other = tmp.path().join("from_flag");
    let out = sblabel(&[
        "run",
        "--config",
        p(&cfg),
        "--output-dir",
        p(&other),
        "--alphas",
        "0.3,0.4",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(!tmp.path().join("from_config").exists());
    let sweep = fs::read_to_string(other.join("report/sweep_table.csv")).unwrap();
    let cells: Vec<&str> = sweep.lines().skip(2).collect();
    assert!(
        cells
            .iter()
            .all(|l| l.contains(",4,0.3,") || l.contains(",4,0.4,")),
        "{sweep}"
    );
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");

    // Configuration problems: 2.
    let bids = synth(tmp.path());
    let out = sblabel(&["run", "--input", p(&bids), "--output-dir", p(&out_dir)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("seed"));
    let out = sblabel(&[
        "run",
        "--input",
        p(&bids),
        "--output-dir",
        p(&out_dir),
        "--seed",
        "1",
        "--k-min",
        "1",
    ]);
    assert_eq!(code(&out), 2);
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "seeed = 3\n").unwrap();
    assert_eq!(code(&sblabel(&["run", "--config", p(&cfg)])), 2);
    assert_eq!(code(&sblabel(&["no-such-verb"])), 2);

    // Bad data: 3.
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "auction_id,bidder\nA,b\n").unwrap();
    let out = sblabel(&["ingest", "--input", p(&bad), "--output-dir", p(&out_dir)]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("ingest stage"));

    // Missing upstream artifact: reported as a data problem naming the stage.
    let empty = tmp.path().join("empty");
    let out = sblabel(&["sweep", "--output-dir", p(&empty), "--seed", "1"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("partition stage"), "{}", stderr(&out));

    // Unreadable input: 4.
    let missing = tmp.path().join("missing.csv");
    let out = sblabel(&[
        "ingest",
        "--input",
        p(&missing),
        "--output-dir",
        p(&out_dir),
    ]);
    assert_eq!(code(&out), 4);
}

#[test]
fn failed_run_keeps_partial_marker() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.csv");
    fs::write(
        &bad,
        "auction_id,bidder_id,seller_id,bid_amount,bid_time,duration,duration_unit,start_price,winner_id\n\
         A1,b1,s1,10,99,1,hours,1,\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = sblabel(&[
        "run",
        "--input",
        p(&bad),
        "--output-dir",
        p(&out_dir),
        "--seed",
        "1",
    ]);
    assert_eq!(code(&out), 3);
    assert!(out_dir.join(".partial").is_file());
}

#[test]
fn full_scale_synth_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let dest = tmp.path().join("full.csv");
    let out = sblabel(&["synth", "--seed", "1", "--full-scale", "--output", p(&dest)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("807 auctions"));
    let out = sblabel(&[
        "synth",
        "--seed",
        "1",
        "--full-scale",
        "--auctions",
        "5",
        "--output",
        p(&dest),
    ]);
    assert_eq!(code(&out), 2);
}
