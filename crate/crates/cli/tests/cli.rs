use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mpcnet"))
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(scn: &Path, out: &Path, seed: u64) -> Output {
    bin().arg("run").arg(scn).arg("--out").arg(out).arg("--seed").arg(seed.to_string()).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn bundled() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(scenarios())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "scn"))
        .collect();
    v.sort();
    v
}

/// `(id, events)` per computation in a trace file.
fn computations(trace: &str) -> Vec<(String, Vec<String>)> {
    let mut out: Vec<(String, Vec<String>)> = Vec::new();
    for line in trace.lines() {
        if let Some(rest) = line.strip_prefix("computation id=") {
            out.push((rest.split_whitespace().next().unwrap().to_string(), Vec::new()));
        } else if let Some(e) = line.strip_prefix("event ") {
            out.last_mut().unwrap().1.push(e.to_string());
        }
    }
    out
}

#[test]
fn average_matches_plain_mean() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&scenarios().join("average.scn"), dir.path(), 1);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mean = (51000u64 + 60000 + 48000) / 3;
    assert!(stdout(&o).contains(&format!("outputs={mean} expected={mean}")), "{}", stdout(&o));
    for f in ["trace.txt", "ledger.dump", "settlement.txt", "outputs.txt", "metrics.csv", "run.log"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("n,baseline_msgs,hierarchical_msgs,rounds\n"));
    assert_eq!(metrics.lines().count(), 4);
}

#[test]
fn cheater_exits_2_and_is_slashed() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&scenarios().join("cheater.scn"), dir.path(), 1);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stdout(&o).contains("channel=mac_check"));
    let settlement = fs::read_to_string(dir.path().join("settlement.txt")).unwrap();
    let line = settlement.lines().find(|l| l.ends_with("reason=wrong-share")).expect("cheater line");
    assert!(line.contains("slash=100"), "{line}");
}

#[test]
fn missing_circuit_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("x.scn");
    fs::write(&scn, "circuit=nowhere/gone.circ\ninput.0=1\n").unwrap();
    let o = run(&scn, &dir.path().join("out"), 1);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gone.circ"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&dir.path().join("absent.scn"), dir.path(), 1);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("absent.scn"));

    let scn = dir.path().join("bad.scn");
    fs::write(&scn, "nodes=twelve\n").unwrap();
    let o = run(&scn, dir.path(), 1);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.scn:1"), "{}", stderr(&o));

    // Too few nodes for the committee is caught at start-up.
    fs::write(dir.path().join("id.circ"), "in a\nout a\n").unwrap();
    fs::write(&scn, "nodes=3\ncommittee=5\ncircuit=id.circ\ninput.0=1\n").unwrap();
    let o = run(&scn, dir.path(), 1);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("eligible nodes"), "{}", stderr(&o));

    let o = bin().args(["run", "x.scn", "--out", "o"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1), "missing --seed is a usage error");
}

#[test]
fn audit_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let honest = dir.path().join("honest");
    run(&scenarios().join("average.scn"), &honest, 1);
    let id = computations(&fs::read_to_string(honest.join("trace.txt")).unwrap())[0].0.clone();
    let o = bin().arg("audit").arg(honest.join("ledger.dump")).args(["--id", &id]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict=pass outputs=53000"));

    let broken = dir.path().join("broken");
    assert_eq!(run(&scenarios().join("broken-commitment.scn"), &broken, 1).status.code(), Some(2));
    let trace = fs::read_to_string(broken.join("trace.txt")).unwrap();
    let id = computations(&trace)[0].0.clone();
    let culprit = trace.lines().find(|l| l.starts_with("fault ")).unwrap().split_whitespace().nth(1).unwrap();
    let culprit = culprit.strip_prefix("pk=").unwrap();
    let o = bin().arg("audit").arg(broken.join("ledger.dump")).args(["--id", &id]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains(&format!("verdict=fail guilty={culprit} ")), "{}", stdout(&o));

    let dump = fs::read_to_string(honest.join("ledger.dump")).unwrap();
    let cut = dir.path().join("cut.dump");
    fs::write(&cut, &dump[..dump.len() / 2]).unwrap();
    let o = bin().arg("audit").arg(&cut).args(["--id", &id]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("corrupt-dump"));

    let o = bin().arg("audit").arg(honest.join("ledger.dump")).args(["--id", "zz"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}

/// The offline audit reaches the verdict the run recorded, for every
/// computation of every bundled scenario.
#[test]
fn audit_agrees_with_run_for_every_bundled_scenario() {
    let dir = tempfile::tempdir().unwrap();
    for scn in bundled() {
        let out = dir.path().join(scn.file_stem().unwrap());
        let o = run(&scn, &out, 9);
        assert!(matches!(o.status.code(), Some(0 | 2)), "{}: {}", scn.display(), stderr(&o));
        let dump = out.join("ledger.dump");
        for (id, events) in computations(&fs::read_to_string(out.join("trace.txt")).unwrap()) {
            let a = bin().arg("audit").arg(&dump).args(["--id", &id]).output().unwrap();
            let recorded = events.iter().find(|e| e.starts_with("audit "));
            match recorded.map(String::as_str) {
                Some("audit pass") => assert_eq!(a.status.code(), Some(0), "{}", scn.display()),
                Some(e) if e.starts_with("audit fail") => assert_eq!(a.status.code(), Some(2), "{}", scn.display()),
                _ => {
                    assert_eq!(a.status.code(), Some(1), "{}", scn.display());
                    assert!(stderr(&a).contains("no public trail"));
                }
            }
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for scn in bundled() {
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        run(&scn, &a, 5);
        run(&scn, &b, 5);
        for f in ["trace.txt", "ledger.dump", "settlement.txt", "outputs.txt"] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{} {f}", scn.display());
        }
    }
}

#[test]
fn keygen() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = bin().args(["keygen", "--count", "3", "--seed", "42", "--out"]).arg(d).output().unwrap();
        assert_eq!(o.status.code(), Some(0));
    }
    let mut pks = Vec::new();
    for i in 0..3 {
        let name = format!("key-{i}.txt");
        let text = fs::read_to_string(a.join(&name)).unwrap();
        assert_eq!(text, fs::read_to_string(b.join(&name)).unwrap());
        let pk = text.lines().next().unwrap().strip_prefix("public=").unwrap().to_string();
        assert_eq!(pk.len(), 64);
        pks.push(pk);
    }
    pks.sort();
    pks.dedup();
    assert_eq!(pks.len(), 3);

    let o = bin().args(["keygen", "--count", "0", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(1));

    // An output path that is a file cannot become a directory.
    let file = dir.path().join("f");
    fs::write(&file, "").unwrap();
    let o = bin().args(["keygen", "--count", "1", "--out"]).arg(&file).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("creating"));
}
