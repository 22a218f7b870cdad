use std::path::Path;
use std::process::{Command, Output};

use papuf::metrics::{MetricsReport, Enrollment};
use papuf::response::CrpSet;

fn papuf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_papuf"))
        .current_dir(dir)
        .env_remove("PAPUF_OUT_DIR")
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn device_new_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["device", "new", "--design", "pa-puf", "--stages", "64", "--seed", "7", "--out-dir", "o"];
    assert!(papuf(dir.path(), &args).status.success());
    let first = std::fs::read(dir.path().join("o/device.txt")).unwrap();
    assert!(papuf(dir.path(), &args).status.success());
    assert_eq!(first, std::fs::read(dir.path().join("o/device.txt")).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("# config_hash="));
    assert!(dir.path().join("o/config.toml").exists());
    let show = stdout(&papuf(dir.path(), &["device", "show", "o/device.txt"]));
    assert!(show.contains("netlist=pa-puf/64\n"));
    let id = papuf::seed::derive_seed(papuf::seed::derive_seed(7, 0), 0);
    assert!(show.contains(&format!("seed={id}\n")));

    // `device new --id 1` is member 1 of the population `crp gen` uses.
    let one = ["device", "new", "--id", "1", "--stages", "16", "--seed", "7", "--out-dir", "p"];
    assert!(papuf(dir.path(), &one).status.success());
    let gen = ["crp", "gen", "--population", "2", "--challenges", "3", "--repetitions", "2", "--stages", "16", "--seed", "7", "--out-dir", "p"];
    assert!(papuf(dir.path(), &gen).status.success());
    let single = ["crp", "gen", "--device", "p/device.txt", "--challenges", "3", "--repetitions", "2", "--seed", "7", "--out-dir", "q"];
    assert!(papuf(dir.path(), &single).status.success());
    let rows = |p: &str| {
        let text = std::fs::read_to_string(dir.path().join(p)).unwrap();
        text.lines().filter(|l| l.starts_with("1,")).map(String::from).collect::<Vec<_>>()
    };
    assert!(!rows("q/crps.csv").is_empty());
    assert_eq!(rows("p/crps.csv"), rows("q/crps.csv"));
}

#[test]
fn metrics_pipeline_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let gen = papuf(
        dir.path(),
        &["crp", "gen", "--population", "3", "--challenges", "12", "--repetitions", "5", "--stages", "32", "--out-dir", "run"],
    );
    assert!(gen.status.success(), "{}", stderr(&gen));
    let out = papuf(dir.path(), &["metrics", "--crps", "run/crps.csv", "--out-dir", "run"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("run/crps.csv")).unwrap();
    let report = MetricsReport::compute(&CrpSet::from_csv(&text).unwrap(), Enrollment::default()).unwrap();
    let mut expected = report.entries();
    expected.insert("config_hash".into(), papuf::cli::file_hash(&text).unwrap());
    let expected: String = expected.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    assert_eq!(stdout(&out), expected);
    for f in ["metrics.txt", "intra_hd.csv", "inter_hd.csv"] {
        assert!(dir.path().join("run").join(f).exists(), "{f}");
    }
    let csv = papuf(dir.path(), &["metrics", "--crps", "run/crps.csv", "--format", "csv", "--out-dir", "run"]);
    assert!(stdout(&csv).starts_with("key,value\n"));
}

#[test]
fn exit_codes_and_error_lines() {
    let dir = tempfile::tempdir().unwrap();
    let usage = papuf(dir.path(), &["device", "new", "--no-such-flag"]);
    assert_eq!(usage.status.code(), Some(2));
    let bad = papuf(dir.path(), &["crp", "gen", "--response-size", "7"]);
    assert_eq!(bad.status.code(), Some(1));
    let err = stderr(&bad);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error: kind=parameter msg="));
    let missing = papuf(dir.path(), &["device", "show", "nope.txt"]);
    assert!(stderr(&missing).starts_with("error: kind=io msg="));
    let netlist = papuf(dir.path(), &["device", "new", "--netlist", "ff-pa-puf/8/5:3"]);
    assert!(stderr(&netlist).starts_with("error: kind=netlist msg="));
}

#[test]
fn report_refuses_mixed_configs() {
    let dir = tempfile::tempdir().unwrap();
    for (seed, out) in [("1", "a"), ("2", "b")] {
        let args = ["crp", "gen", "--population", "2", "--challenges", "4", "--repetitions", "3", "--stages", "16", "--seed", seed, "--out-dir", out];
        assert!(papuf(dir.path(), &args).status.success());
        let crps = format!("{out}/crps.csv");
        assert!(papuf(dir.path(), &["metrics", "--crps", &crps, "--out-dir", out]).status.success());
    }
    let same = papuf(dir.path(), &["report", "a/metrics.txt", "a/metrics.txt"]);
    assert!(same.status.success());
    assert!(stdout(&same).contains("metrics2.uniqueness="));
    let mixed = papuf(dir.path(), &["report", "a/metrics.txt", "b/metrics.txt"]);
    assert_eq!(mixed.status.code(), Some(1));
    let forced = papuf(dir.path(), &["report", "a/metrics.txt", "b/metrics.txt", "--force", "--format", "csv"]);
    assert!(forced.status.success());
    assert!(stdout(&forced).starts_with("key,value\n"));
}

#[test]
fn config_file_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), "netlist = \"apuf/16\"\nseed = 3\nout_dir = \"from-config\"\n").unwrap();
    let o = papuf(dir.path(), &["device", "new", "--config", "exp.toml"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("netlist=apuf/16"));
    assert!(dir.path().join("from-config/device.txt").exists());

    let env = Command::new(env!("CARGO_BIN_EXE_papuf"))
        .current_dir(dir.path())
        .env("PAPUF_OUT_DIR", "from-env")
        .args(["device", "new", "--stages", "8"])
        .output()
        .unwrap();
    assert!(env.status.success());
    assert!(dir.path().join("from-env/device.txt").exists());
}

#[test]
fn keygen_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    assert!(papuf(dir.path(), &["device", "new", "--seed", "4", "--out-dir", "k"]).status.success());
    let enroll = stdout(&papuf(dir.path(), &["keygen", "enroll", "--device", "k/device.txt", "--out-dir", "k"]));
    let key = enroll.lines().find_map(|l| l.strip_prefix("key=")).unwrap().to_string();
    let again = stdout(&papuf(
        dir.path(),
        &["keygen", "reproduce", "--device", "k/device.txt", "--helper", "k/helper.txt", "--seed", "123"],
    ));
    assert!(again.contains("status=ok"), "{again}");
    assert!(again.contains(&format!("key={key}")));
}

#[test]
fn attack_and_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let gen = ["crp", "gen", "--design", "apuf", "--stages", "32", "--population", "1", "--challenges", "100", "--repetitions", "1", "--response-size", "16", "--out-dir", "x"];
    assert!(papuf(dir.path(), &gen).status.success());
    let t = papuf(dir.path(), &["attack", "train", "--crps", "x/crps.csv", "--out-dir", "x"]);
    assert!(stdout(&t).contains("holdout_accuracy="), "{}", stderr(&t));
    let e = papuf(dir.path(), &["attack", "eval", "--model", "x/model.txt", "--crps", "x/crps.csv"]);
    assert!(stdout(&e).starts_with("accuracy="));
    let c = papuf(dir.path(), &["attack", "compare", "--target", "apuf/16", "--target", "pa-puf/16", "--budget", "400", "--seeds", "2", "--out-dir", "x"]);
    assert_eq!(stdout(&c).lines().count(), 5, "{}", stderr(&c));
    let s = papuf(dir.path(), &["sweep", "size", "--sizes", "8,16,32,64,128", "--seeds", "1", "--population", "2", "--challenges", "3", "--repetitions", "3", "--stages", "16", "--out-dir", "x"]);
    assert_eq!(stdout(&s).lines().count(), 6, "{}", stderr(&s));
    let f = papuf(dir.path(), &["sweep", "ff", "--max-taps", "2", "--seeds", "1", "--population", "2", "--challenges", "3", "--repetitions", "3", "--stages", "16", "--out-dir", "x"]);
    assert!(stdout(&f).contains("taps,uniqueness,reliability\n0,"), "{}", stderr(&f));
}
