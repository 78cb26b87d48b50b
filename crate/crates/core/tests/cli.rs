use std::fs;
use std::path::Path;
use std::process::Command;

use kql::envs::FiniteMdp;

fn kql() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kql"))
}

fn train_into(dir: &Path) {
    let out = kql()
        .args(["train", "--env", "cartpole", "--kernel", "rbf", "--steps", "150"])
        .args(["--seed", "4", "--eval-episodes", "3", "--out"])
        .arg(dir)
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn train_csvs_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    train_into(&a);
    train_into(&b);
    for name in ["train.csv", "eval.csv"] {
        let x = fs::read(a.join(name)).unwrap();
        assert_eq!(x, fs::read(b.join(name)).unwrap(), "{name} differs");
        assert!(!x.is_empty());
    }
    let train = fs::read_to_string(a.join("train.csv")).unwrap();
    let mut lines = train.lines();
    assert_eq!(lines.next(), Some("t,episode,action,raw_reward,norm_reward,done,q_tilde,width"));
    assert_eq!(lines.count(), 150);
    let eval = fs::read_to_string(a.join("eval.csv")).unwrap();
    assert!(eval.starts_with("episode,raw_return\n"));
    assert_eq!(eval.lines().count(), 4);
}

#[test]
fn regret_writes_curve() {
    let tmp = tempfile::tempdir().unwrap();
    let mdp = tmp.path().join("chain.mdp");
    fs::write(&mdp, FiniteMdp::chain(5, 0.1).unwrap().to_text(0.95)).unwrap();
    let out = tmp.path().join("regret.csv");
    let run = kql()
        .args(["regret", "--steps", "120", "--mdp"])
        .arg(&mdp)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("t,cum_regret,theory_bound\n"));
    assert_eq!(text.lines().count(), 121);
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| kql().args(args).output().unwrap().status.code();
    assert_eq!(code(&["checks", "--sizes", "5,10", "--seeds", "0..3"]), Some(0));
    assert_eq!(code(&["checks", "--sizes", "5", "--seeds", "0", "--inject-fault"]), Some(1));
    assert_eq!(code(&["train", "--env", "lunarlander"]), Some(2));
    assert_eq!(code(&["train", "--env", "cartpole", "--kernel", "poly"]), Some(2));
    assert_eq!(code(&["train", "--env", "cartpole", "--beta", "1e9", "--steps", "10"]), Some(2));
    assert_eq!(code(&["regret", "--mdp", "/nonexistent/chain.mdp"]), Some(3));
}

#[test]
fn empty_check_grid_succeeds() {
    let out = kql().args(["checks", "--sizes", "", "--seeds", "0..2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 instances, 0 checks, 0 failed"));
}
