use std::path::Path;
use std::process::{Command, Output};

use convsql::episode::{run_episode, EpisodeConfig, Sampling, Trajectory};
use convsql::fixtures::recorded_cases;
use convsql::policy::{ScriptedMode, ScriptedPolicy};
use convsql::task::{read_jsonl, write_jsonl, DialogueTask};

fn convsql(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convsql"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn init(dir: &Path) {
    let out = convsql(&["init-fixtures", "--out", "fx"], dir);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["config.toml", "tasks.jsonl", "pack.jsonl", "dbs"] {
        assert!(dir.join("fx").join(f).exists(), "missing {f}");
    }
}

#[test]
fn fixtures_then_collect_curriculum_and_export() {
    let dir = tempfile::tempdir().unwrap();
    init(dir.path());
    let fx = dir.path().join("fx");
    let out = convsql(
        &["collect", "--config", "fx/config.toml", "--rounds", "1"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("round"));
    let journal = fx.join("journal");
    assert!(journal.join("profiles.jsonl").is_file());
    assert!(journal.join("store.jsonl").is_file());

    let out = convsql(
        &["collect", "--config", "fx/config.toml", "--rounds", "1"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "resuming a finished round");

    let out = convsql(
        &[
            "curriculum",
            "--profiles",
            "fx/journal/profiles.jsonl",
            "--tasks",
            "fx/tasks.jsonl",
            "--out",
            "bins",
            "--bin-size",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let out = convsql(
        &[
            "export-sft",
            "--store",
            "fx/journal/store.jsonl",
            "--out",
            "sft.jsonl",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let records: Vec<serde_json::Value> = read_jsonl(&dir.path().join("sft.jsonl")).unwrap();
    let stored: Vec<serde_json::Value> = read_jsonl(&journal.join("store.jsonl")).unwrap();
    assert_eq!(records.len(), stored.len());
    assert!(!records.is_empty());
}

#[test]
fn eval_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    init(dir.path());
    let tasks: Vec<DialogueTask> = read_jsonl(&dir.path().join("fx/tasks.jsonl")).unwrap();
    let gold: Vec<serde_json::Value> = tasks
        .iter()
        .map(|t| serde_json::json!({"task_id": t.id(), "sql": t.gold_sql}))
        .collect();
    write_jsonl(&dir.path().join("gold.jsonl"), &gold).unwrap();
    write_jsonl(&dir.path().join("partial.jsonl"), &gold[..1]).unwrap();
    std::fs::write(dir.path().join("broken.jsonl"), "{not json\n").unwrap();

    let args = |preds: &str, reg: &str| {
        convsql(
            &[
                "eval",
                "--registry",
                reg,
                "--dataset",
                "fx/tasks.jsonl",
                "--predictions",
                preds,
                "--json",
                "r.json",
            ],
            dir.path(),
        )
    };
    let ok = args("gold.jsonl", "fx/dbs");
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["overall"]["ex"], 100.0);
    assert_eq!(report["overall"]["n"], 2);

    assert_eq!(code(&args("partial.jsonl", "fx/dbs")), 1);
    assert_eq!(code(&args("broken.jsonl", "fx/dbs")), 1);
    assert_eq!(code(&args("gold.jsonl", "no/such/registry")), 2);
    assert_eq!(code(&convsql(&["eval", "--registry"], dir.path())), 1);
    assert_eq!(code(&convsql(&["--help"], dir.path())), 0);
}

#[test]
fn score_checks_grammar() {
    let dir = tempfile::tempdir().unwrap();
    init(dir.path());
    let fx = dir.path().join("fx");
    let registry = convsql::db::DatabaseRegistry::load(fx.join("dbs")).unwrap();
    let pack = read_jsonl(&fx.join("pack.jsonl")).unwrap();
    let policy = ScriptedPolicy::new(pack, ScriptedMode::Strict).unwrap();
    let trajs: Vec<Trajectory> = recorded_cases()
        .iter()
        .map(|c| {
            run_episode(
                &policy,
                &c.task,
                &registry,
                EpisodeConfig::default(),
                Sampling::default(),
            )
            .unwrap()
        })
        .collect();
    write_jsonl(&dir.path().join("t.jsonl"), &trajs).unwrap();

    let out = convsql(
        &[
            "score",
            "--config",
            "fx/config.toml",
            "--trajectories",
            "t.jsonl",
            "--check",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let lines: Vec<serde_json::Value> = stdout(&out)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|l| l["reward"]["r_ex"] == 1.0));

    let mut broken = trajs[0].clone();
    broken.actions.remove(0);
    write_jsonl(&dir.path().join("bad.jsonl"), &[broken]).unwrap();
    let out = convsql(
        &[
            "score",
            "--config",
            "fx/config.toml",
            "--trajectories",
            "bad.jsonl",
            "--check",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 1);
    let out = convsql(
        &[
            "score",
            "--config",
            "fx/config.toml",
            "--trajectories",
            "bad.jsonl",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);

    std::fs::write(fx.join("bad.toml"), "registry = \"dbs\"\nunknown_key = 1\n").unwrap();
    assert_eq!(
        code(&convsql(
            &["collect", "--config", "fx/bad.toml"],
            dir.path()
        )),
        1
    );
    assert_eq!(
        code(&convsql(
            &["collect", "--config", "fx/missing.toml"],
            dir.path()
        )),
        1
    );
}
