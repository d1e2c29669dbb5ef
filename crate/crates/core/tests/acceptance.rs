//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use convsql::db::ExecClass;
use convsql::episode::{
    run_episode, Action, ActionKind, Episode, EpisodeConfig, EpisodeError, Origin, Sampling,
    Termination, Trajectory, Verdict,
};
use convsql::fixtures::{case_pack, recorded_cases};
use convsql::grpo::{build_loss_mask, group_advantages, RewardGroup};
use convsql::pipeline::{
    behaviour_text, curriculum_bins, rollout_seed, run_collection, write_curriculum, CollectConfig,
    Journal, PipelineConfig, ScoredTrajectory, SuccessProfile,
};
use convsql::policy::{
    FinishReason, GenerationRequest, GenerationResponse, Policy, PolicyError, Role, ScriptedMode,
    ScriptedPolicy, Usage,
};
use convsql::reward::{
    reward_e_verify, reward_m_verify, score_trajectory, GoldReference, RewardWeights,
};
use convsql::sql::{classify_hardness, clause_f1, decompose_str, normalize_sql, Hardness};
use convsql::task::{read_jsonl, DialogueTask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Option<Outcome>);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let spent = start.elapsed();
    check(spent < limit, || format!("took {spent:?}, limit {limit:?}"))
}

fn e_verify_table() -> Outcome {
    let start = Instant::now();
    let expected = [
        (ExecClass::Ok, Verdict::Pass, 1.0),
        (ExecClass::Ok, Verdict::Fail, 0.0),
        (ExecClass::Null, Verdict::Pass, 0.0),
        (ExecClass::Null, Verdict::Fail, 0.1),
        (ExecClass::Error, Verdict::Pass, 0.0),
        (ExecClass::Error, Verdict::Fail, 1.0),
    ];
    for (class, verdict, want) in expected {
        let got = reward_e_verify(class, verdict);
        check(got == want, || {
            format!("({class:?}, {verdict:?}) = {got}, want {want}")
        })?;
    }
    within(start, Duration::from_secs(1))?;
    Ok("6/6 cells exact".into())
}

fn m_verify_complement() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let a = normalize_sql(&common::generate(&mut rng).sql).map_err(|e| e.to_string())?;
        let b = normalize_sql(&common::generate(&mut rng).sql).map_err(|e| e.to_string())?;
        let sum = reward_m_verify(Verdict::Pass, &a, &b) + reward_m_verify(Verdict::Fail, &a, &b);
        worst = worst.max((sum - 1.0).abs());
    }
    check(worst <= 1e-12, || format!("max |pass+fail-1| = {worst:e}"))?;
    within(start, Duration::from_secs(5))?;
    Ok(format!("200 pairs, max deviation {worst:e}"))
}

fn clause_f1_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 1000;
    let mut worst = 0.0f64;
    for _ in 0..n {
        let p = common::generate(&mut rng);
        let g = common::generate(&mut rng);
        let dp = decompose_str(&p.sql, None).map_err(|e| format!("{}: {e}", p.sql))?;
        let dg = decompose_str(&g.sql, None).map_err(|e| format!("{}: {e}", g.sql))?;
        let got = clause_f1(&dp, &dg);
        let want = common::oracle_clause_f1(&p, &g);
        let d = (got - want).abs();
        check(d <= 1e-12, || {
            format!("{} vs {}: {got} != {want}", p.sql, g.sql)
        })?;
        check((clause_f1(&dp, &dp) - 1.0).abs() <= 1e-12, || {
            format!("self F1 of {} != 1", p.sql)
        })?;
        worst = worst.max(d);
    }
    Ok(format!("{n} pairs, max deviation {worst:e}"))
}

fn grammar_automaton() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut accepted, mut disagreements) = (0, Vec::new());
    for _ in 0..10_000 {
        let seq = common::random_sequence(&mut rng, 0.85);
        let actions: Vec<Action> = seq
            .iter()
            .map(|&(k, v)| {
                let mut a = Action::new(k);
                a.verdict = v;
                a
            })
            .collect();
        let ours =
            convsql::episode::validate_trajectory(&Trajectory::from_actions(actions)).is_empty();
        let theirs = common::oracle_accepts(&seq, 4);
        accepted += usize::from(theirs);
        if ours != theirs {
            disagreements.push(seq);
        }
    }
    check(disagreements.is_empty(), || {
        format!(
            "{} disagreements, first {:?}",
            disagreements.len(),
            disagreements[0]
        )
    })?;
    check(accepted > 1000 && accepted < 9000, || {
        format!("unbalanced sample: {accepted} accepted")
    })?;
    Ok(format!(
        "10000 sequences, {accepted} accepted, 0 disagreements"
    ))
}

fn replays(reg: &convsql::db::DatabaseRegistry) -> Result<Vec<(DialogueTask, Trajectory)>, String> {
    let pack = case_pack(reg, EpisodeConfig::default()).map_err(|e| e.to_string())?;
    let policy = ScriptedPolicy::new(pack, ScriptedMode::Strict).map_err(|e| e.to_string())?;
    recorded_cases()
        .into_iter()
        .map(|c| {
            run_episode(
                &policy,
                &c.task,
                reg,
                EpisodeConfig::default(),
                Sampling::default(),
            )
            .map(|t| (c.task, t))
            .map_err(|e| e.to_string())
        })
        .collect()
}

fn case_replay() -> Outcome {
    let start = Instant::now();
    let (_dir, reg) = common::registry();
    let mut notes = Vec::new();
    for (task, t) in replays(&reg)? {
        check(t.termination == Termination::Finalized, || {
            format!("{}: {:?}", task.id(), t.termination)
        })?;
        let v = convsql::episode::validate_trajectory(&t);
        check(v.is_empty(), || format!("{}: {v:?}", task.id()))?;
        let gold =
            GoldReference::compute(&task, &reg, Default::default()).map_err(|e| e.to_string())?;
        let r = score_trajectory(&t, &gold, &RewardWeights::default());
        check(r.r_ex == 1.0, || {
            format!("{}: r_ex = {}", task.id(), r.r_ex)
        })?;
        notes.push(format!(
            "{} r_ex=1 ({} actions)",
            task.id(),
            t.actions.len()
        ));
    }
    within(start, Duration::from_secs(10))?;
    Ok(notes.join(", "))
}

fn grpo_advantages() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (mut checked_std, mut worst_mean, mut worst_std) = (0, 0.0f64, 0.0f64);
    for i in 0..1000 {
        let g = rng.gen_range(2..=16);
        // Dyadic rewards keep shifted copies exactly representable.
        let rewards: Vec<f64> = (0..g)
            .map(|_| {
                if i % 2 == 0 {
                    rng.gen_range(0..=64) as f64 / 32.0
                } else {
                    rng.gen_range(0..=1) as f64
                }
            })
            .collect();
        let group = RewardGroup {
            rewards: rewards.clone(),
            epsilon: 1e-8,
        };
        let a = group_advantages(&group);
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        worst_mean = worst_mean.max(mean.abs());
        check(mean.abs() <= 1e-9, || format!("group {i}: mean {mean:e}"))?;
        let rm = rewards.iter().sum::<f64>() / n;
        let var = rewards.iter().map(|r| (r - rm).powi(2)).sum::<f64>() / n;
        if var > 1e-6 {
            let am = mean;
            let sd = (a.iter().map(|x| (x - am).powi(2)).sum::<f64>() / n).sqrt();
            worst_std = worst_std.max((sd - 1.0).abs());
            check((sd - 1.0).abs() <= 1e-5, || format!("group {i}: std {sd}"))?;
            checked_std += 1;
        }
        let c = rng.gen_range(-8..=8) as f64;
        let shifted = RewardGroup {
            rewards: rewards.iter().map(|r| r + c).collect(),
            epsilon: 1e-8,
        };
        check(group_advantages(&shifted) == a, || {
            format!("group {i}: shift by {c} changed advantages")
        })?;
    }
    Ok(format!(
        "1000 groups, max |mean| {worst_mean:e}, max |std-1| {worst_std:e} over {checked_std}"
    ))
}

/// Char ranges strictly between each `open` and the following `close`.
fn regions(text: &[char], open: &str, close: &str, from: usize) -> Vec<(usize, usize)> {
    let s: String = text.iter().collect();
    let mut out = Vec::new();
    let byte_to_char = |b: usize| s[..b].chars().count();
    let mut at = s.char_indices().nth(from).map_or(s.len(), |(b, _)| b);
    while let Some(o) = s[at..].find(open) {
        let body = at + o + open.len();
        let Some(c) = s[body..].find(close) else {
            break;
        };
        out.push((byte_to_char(body), byte_to_char(body + c)));
        at = body + c + close.len();
    }
    out
}

fn loss_masks() -> Outcome {
    let (_dir, reg) = common::registry();
    let (mut responses, mut answers) = (0, 0);
    for (task, t) in replays(&reg)? {
        let text: Vec<char> = t.text().chars().collect();
        let flags = build_loss_mask(&t).to_flags(text.len());
        let prompt_len = t.segments[0].text.chars().count();
        check(flags[..prompt_len].iter().all(|f| !f), || {
            format!("{}: prompt has masked characters", task.id())
        })?;
        for (a, b) in regions(&text, "<tool_response>", "</tool_response>", prompt_len) {
            responses += 1;
            check(flags[a..b].iter().all(|f| !f), || {
                format!("{}: tool response {a}..{b} masked", task.id())
            })?;
        }
        let mut spans = Vec::new();
        let mut at = 0;
        for seg in &t.segments {
            let n = seg.text.chars().count();
            spans.push((seg.origin, at, at + n));
            at += n;
        }
        for &(origin, a, b) in &spans {
            if origin == Origin::Environment {
                check(flags[a..b].iter().all(|f| !f), || {
                    format!("{}: environment span {a}..{b} masked", task.id())
                })?;
            }
        }
        let in_model = |i: usize| {
            spans
                .iter()
                .any(|&(o, a, b)| o == Origin::Model && a <= i && i < b)
        };
        let found: Vec<_> = regions(&text, "<answer_sql>", "</answer_sql>", prompt_len)
            .into_iter()
            .filter(|r| in_model(r.0))
            .collect();
        check(!found.is_empty(), || {
            format!("{}: no answer found", task.id())
        })?;
        for (a, b) in found {
            answers += 1;
            check(flags[a..b].iter().all(|f| *f), || {
                format!("{}: answer {a}..{b} not masked", task.id())
            })?;
        }
        check(spans.iter().any(|s| s.0 == Origin::Environment), || {
            format!("{}: no environment segments", task.id())
        })?;
    }
    Ok(format!(
        "{responses} tool responses unmasked, {answers} answers masked"
    ))
}

/// Scripted policy whose success on each synthetic task is fixed by design.
struct SyntheticPolicy {
    by_question: HashMap<String, (usize, String)>,
}

fn synthetic_kind(i: usize) -> usize {
    i % 5
}

/// Partially solvable tasks succeed on rollouts whose seed is not a multiple of four.
fn partial_success(seed: u64) -> bool {
    !seed.is_multiple_of(4)
}

impl Policy for SyntheticPolicy {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, PolicyError> {
        let user = &req.messages[1].content;
        let (i, gold) = self
            .by_question
            .iter()
            .find(|(q, _)| user.contains(q.as_str()))
            .map(|(_, v)| v.clone())
            .ok_or(PolicyError::Unavailable("unknown task".into()))?;
        let wrong = "SELECT Name FROM city WHERE ID = -1".to_string();
        let turn = req
            .messages
            .iter()
            .filter(|m| m.role == Role::Assistant)
            .count();
        let checked = |sql: &str| {
            vec![
                common::tool_call("exec_sql", sql),
                common::tool_call("memory_retrieve", sql),
            ]
        };
        let (script, answer) = match synthetic_kind(i) {
            0 => (checked(&wrong), wrong),
            1 | 2 => (checked(&gold), gold),
            _ if !partial_success(req.seed) => (checked(&wrong), wrong),
            _ if req.seed.is_multiple_of(3) => (checked(&gold), gold),
            _ => {
                let typo = format!("SELECT Name FROM citty WHERE ID = {}", req.seed % 997);
                let mut script = vec![common::tool_call("exec_sql", &typo)];
                script.extend(checked(&gold));
                (script, gold)
            }
        };
        let text = script
            .get(turn)
            .cloned()
            .unwrap_or_else(|| format!("<answer_sql>{answer}</answer_sql>"));
        Ok(GenerationResponse {
            text,
            finish: FinishReason::Stop,
            usage: Usage::default(),
        })
    }
}

fn synthetic_tasks() -> Vec<DialogueTask> {
    (0..50)
        .map(|i| {
            let gold = if synthetic_kind(i) == 1 {
                format!("SELECT Name FROM city WHERE ID = {}", i % 7 + 1)
            } else {
                format!("SELECT Name, Population FROM city WHERE Population > {} ORDER BY Population DESC", i * 1000)
            };
            DialogueTask {
                task_id: Some(format!("syn-{i:02}")),
                dialogue_id: format!("syn-{i:02}"),
                turn_index: 0,
                question: format!("Synthetic question #{i} please"),
                history: Vec::new(),
                db_id: "world_1".into(),
                gold_sql: gold,
            }
        })
        .collect()
}

fn algorithm_one() -> Outcome {
    let start = Instant::now();
    let (dir, reg) = common::registry();
    let tasks = synthetic_tasks();
    let policy = SyntheticPolicy {
        by_question: tasks
            .iter()
            .enumerate()
            .map(|(i, t)| (t.question.clone(), (i, t.gold_sql.clone())))
            .collect(),
    };
    let config = PipelineConfig {
        rounds: 2,
        collect: CollectConfig {
            rollouts: 20,
            workers: 4,
            ..Default::default()
        },
        ..Default::default()
    };
    let journal = Journal::new(dir.path().join("journal"));
    let report = run_collection(
        tasks.clone(),
        &policy,
        &reg,
        &RewardWeights::default(),
        &config,
        &journal,
    )
    .map_err(|e| e.to_string())?;

    // Designed successes per task, from the seeds the collector will use.
    let expected: BTreeMap<String, u32> = tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let id = t.id();
            let n = match synthetic_kind(i) {
                0 => 0,
                1 | 2 => 20,
                _ => (0..20)
                    .filter(|&s| partial_success(rollout_seed(0, 0, &id, s)))
                    .count() as u32,
            };
            (id, n)
        })
        .collect();
    let got: BTreeMap<String, u32> = report
        .profiles
        .iter()
        .map(|p| (p.task_id.clone(), p.successes))
        .collect();
    check(got == expected, || {
        format!("success profiles differ: {got:?}")
    })?;

    let unsolvable: BTreeSet<String> = expected
        .iter()
        .filter(|(_, n)| **n == 0)
        .map(|(k, _)| k.clone())
        .collect();
    let round1_pool: BTreeSet<String> = read_json(&journal.round_dir(1).join("pool.json"))?;
    check(round1_pool == unsolvable, || {
        format!("round 1 pool {round1_pool:?} != {unsolvable:?}")
    })?;
    check(
        report.rounds.len() == 2 && report.rounds[1].solved == 0,
        || format!("{:?}", report.rounds),
    )?;
    check(report.rounds[0].solved == 50 - unsolvable.len(), || {
        format!("{:?}", report.rounds[0])
    })?;

    let valid: Vec<ScoredTrajectory> =
        read_jsonl(&journal.round_dir(0).join("valid.jsonl")).map_err(|e| e.to_string())?;
    let hardness: HashMap<String, Hardness> = tasks
        .iter()
        .map(|t| {
            (
                t.id(),
                classify_hardness(&decompose_str(&t.gold_sql, None).unwrap()),
            )
        })
        .collect();
    let (mut easy_tasks, mut hard_tasks) = (0, 0);
    for (id, successes) in &expected {
        if *successes == 0 {
            continue;
        }
        let kept: Vec<&Trajectory> = report
            .store
            .iter()
            .filter(|e| &e.task_id == id)
            .map(|e| &e.trajectory)
            .collect();
        if hardness[id] == Hardness::Easy || *successes == 20 {
            easy_tasks += 1;
            check(!kept.is_empty() && kept.len() <= 2, || {
                format!("{id}: easy branch kept {}", kept.len())
            })?;
            check(kept.iter().all(|t| t.interactions <= 2), || {
                format!("{id}: easy branch kept a long trajectory")
            })?;
        } else {
            hard_tasks += 1;
            let available = valid
                .iter()
                .filter(|s| &s.task_id == id && s.trajectory.interactions >= 2)
                .count();
            check(kept.len() == available.min(3), || {
                format!("{id}: kept {} of {available}", kept.len())
            })?;
            let texts: BTreeSet<String> = kept.iter().map(|t| behaviour_text(t)).collect();
            check(texts.len() == kept.len(), || {
                format!("{id}: kept trajectories share a cluster")
            })?;
        }
    }
    check(easy_tasks > 0 && hard_tasks > 0, || {
        format!("branches not exercised: {easy_tasks} easy, {hard_tasks} hard")
    })?;
    within(start, Duration::from_secs(60))?;
    Ok(format!(
        "pool 50 -> {} as designed; {easy_tasks} easy-branch and {hard_tasks} hard-branch tasks checked",
        unsolvable.len()
    ))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    // The pool file stores tasks keyed by id.
    let ids = v
        .get("tasks")
        .and_then(|t| t.as_object())
        .map(|o| serde_json::json!(o.keys().collect::<Vec<_>>()));
    serde_json::from_value(ids.unwrap_or(v)).map_err(|e| e.to_string())
}

fn curriculum() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let profiles: Vec<SuccessProfile> = (0..5321)
        .map(|i| SuccessProfile {
            task_id: format!("t{i:05}"),
            successes: rng.gen_range(0..=20),
            rollouts: 20,
        })
        .collect();
    let full = profiles.iter().filter(|p| p.successes == 20).count();
    let bins = curriculum_bins(&profiles, 2000);
    let flat: Vec<&SuccessProfile> = bins.iter().flatten().collect();
    check(flat.iter().all(|p| p.successes < 20), || {
        "an s=20 item was binned".into()
    })?;
    check(flat.len() == profiles.len() - full, || {
        format!("{} binned, want {}", flat.len(), profiles.len() - full)
    })?;
    check(
        flat.windows(2).all(|w| w[0].successes >= w[1].successes),
        || "successes increase somewhere".into(),
    )?;
    let sizes: Vec<usize> = bins.iter().map(Vec::len).collect();
    let (last, rest) = sizes.split_last().ok_or("no bins")?;
    check(
        rest.iter().all(|&s| s == 2000) && *last <= 2000 && *last > 0,
        || format!("bin sizes {sizes:?}"),
    )?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let tasks: BTreeMap<String, DialogueTask> = profiles
        .iter()
        .map(|p| {
            let t = DialogueTask {
                task_id: Some(p.task_id.clone()),
                dialogue_id: p.task_id.clone(),
                turn_index: 0,
                question: "q".into(),
                history: Vec::new(),
                db_id: "world_1".into(),
                gold_sql: "SELECT 1".into(),
            };
            (p.task_id.clone(), t)
        })
        .collect();
    let files = write_curriculum(dir.path(), &bins, &tasks).map_err(|e| e.to_string())?;
    let names: Vec<String> = files
        .iter()
        .map(|f| f.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    let want: Vec<String> = (1..=bins.len())
        .map(|k| format!("train_rl{k}.jsonl"))
        .collect();
    check(names == want, || format!("files {names:?}"))?;
    Ok(format!(
        "{} profiles, {full} fully solved dropped, bins {sizes:?}",
        profiles.len()
    ))
}

/// Turn-level gold queries from a SParC-style file: a list of dialogues
/// each holding an `interaction` list of turns with a `query`.
fn turn_queries(path: &Path) -> Result<Vec<String>, String> {
    let v: serde_json::Value = read_json_value(path)?;
    let dialogues = v
        .as_array()
        .ok_or_else(|| format!("{}: expected a list", path.display()))?;
    let mut out = Vec::new();
    for d in dialogues {
        for turn in d["interaction"].as_array().into_iter().flatten() {
            if let Some(q) = turn["query"].as_str() {
                out.push(q.to_string());
            }
        }
    }
    Ok(out)
}

fn read_json_value(path: &Path) -> Result<serde_json::Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn dataset_files(root: &Path) -> Vec<PathBuf> {
    [
        "train.json",
        "dev.json",
        "sql_state_tracking/cosql_train.json",
        "sql_state_tracking/cosql_dev.json",
    ]
    .iter()
    .map(|f| root.join(f))
    .filter(|p| p.is_file())
    .collect()
}

fn hardness_distribution() -> Option<Outcome> {
    let sets = [
        ("SPARC_DIR", "SParC", [40.1, 36.7, 12.1, 11.1]),
        ("COSQL_DIR", "CoSQL", [41.4, 31.8, 16.2, 10.5]),
    ];
    let mut lines = Vec::new();
    for (var, name, target) in sets {
        let Some(root) = std::env::var_os(var).map(PathBuf::from) else {
            continue;
        };
        let run = || -> Outcome {
            let files = dataset_files(&root);
            check(!files.is_empty(), || {
                format!("{var}={} has no dialogue files", root.display())
            })?;
            let mut counts = [0usize; 4];
            let mut unparsed = 0;
            for f in &files {
                for q in turn_queries(f)? {
                    match decompose_str(&q, None) {
                        Ok(c) => {
                            counts[Hardness::ALL
                                .iter()
                                .position(|h| *h == classify_hardness(&c))
                                .unwrap()] += 1
                        }
                        Err(_) => unparsed += 1,
                    }
                }
            }
            let total: usize = counts.iter().sum();
            let pct: Vec<f64> = counts
                .iter()
                .map(|c| 100.0 * *c as f64 / total.max(1) as f64)
                .collect();
            let off = pct
                .iter()
                .zip(target)
                .map(|(p, t)| (p - t).abs())
                .fold(0.0, f64::max);
            let shown = pct
                .iter()
                .map(|p| format!("{p:.1}"))
                .collect::<Vec<_>>()
                .join("/");
            check(off <= 2.0, || {
                format!("{name} {shown} vs {target:?}, off by {off:.1}pp")
            })?;
            Ok(format!(
                "{name} {shown} over {total} turns ({unparsed} unparsed)"
            ))
        };
        lines.push(run());
    }
    if lines.is_empty() {
        return None;
    }
    Some(
        lines
            .into_iter()
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.join("; ")),
    )
}

/// Calls `exec_sql` on every turn, never answering.
struct ExecForever;

impl Policy for ExecForever {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, PolicyError> {
        let n = req
            .messages
            .iter()
            .filter(|m| m.role == Role::Assistant)
            .count();
        let text = common::tool_call("exec_sql", &format!("SELECT {n}"));
        Ok(GenerationResponse {
            text,
            finish: FinishReason::Stop,
            usage: Usage::default(),
        })
    }
}

/// Alternates execution and memory checks without ever answering.
struct CheckForever;

impl Policy for CheckForever {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResponse, PolicyError> {
        let n = req
            .messages
            .iter()
            .filter(|m| m.role == Role::Assistant)
            .count();
        let text = match n % 2 {
            0 => common::tool_call("exec_sql", "SELECT count(*) FROM city"),
            _ => format!(
                "<exec_verify>pass</exec_verify>{}",
                common::tool_call("memory_retrieve", "SELECT count(*) FROM city")
            ),
        };
        let text = if n >= 2 && n % 2 == 0 {
            format!("<memory_verify>no_pass</memory_verify>{text}")
        } else {
            text
        };
        Ok(GenerationResponse {
            text,
            finish: FinishReason::Stop,
            usage: Usage::default(),
        })
    }
}

fn interaction_budget() -> Outcome {
    let (_dir, reg) = common::registry();
    let task = &recorded_cases()[0].task;
    let mut notes = Vec::new();
    for (name, policy) in [
        ("exec", &ExecForever as &dyn Policy),
        ("exec+memory", &CheckForever as &dyn Policy),
    ] {
        let t = run_episode(
            policy,
            task,
            &reg,
            EpisodeConfig::default(),
            Sampling::default(),
        )
        .map_err(|e| e.to_string())?;
        check(t.termination == Termination::MaxInteractions, || {
            format!("{name}: {:?}", t.termination)
        })?;
        check(t.interactions == 4, || {
            format!("{name}: {} interactions", t.interactions)
        })?;
        let calls = t.actions.iter().filter(|a| a.kind.is_tool_call()).count();
        check(calls == 4, || {
            format!("{name}: {calls} tool calls recorded")
        })?;
        notes.push(format!("{name} cut at 4"));
    }
    let mut ep =
        Episode::new(task, &reg, EpisodeConfig::default(), 0).map_err(|e| e.to_string())?;
    let sql = normalize_sql("SELECT 1").unwrap();
    let mut push = |kind, verdict| {
        let mut a = Action::with_sql(kind, sql.clone());
        a.verdict = verdict;
        if kind == ActionKind::EVerify {
            a.sql = None;
        }
        ep.apply_action(a)
    };
    push(ActionKind::Propose, None).map_err(|e| e.to_string())?;
    for _ in 0..4 {
        push(ActionKind::Execute, None).map_err(|e| e.to_string())?;
        push(ActionKind::EVerify, Some(Verdict::Fail)).map_err(|e| e.to_string())?;
        push(ActionKind::SelfCorrect, None).map_err(|e| e.to_string())?;
    }
    match push(ActionKind::Execute, None) {
        Err(EpisodeError::InteractionBudgetExceeded(4)) => {
            notes.push("typed 5th call rejected".into())
        }
        other => return Err(format!("typed 5th call: {other:?}")),
    }
    Ok(notes.join(", "))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("e-verify reward table", || Some(e_verify_table())),
        ("m-verify complement identity", || {
            Some(m_verify_complement())
        }),
        ("clause-F1 oracle equivalence", || Some(clause_f1_oracle())),
        ("action grammar vs automaton", || Some(grammar_automaton())),
        ("recorded case replay", || Some(case_replay())),
        ("group advantages", || Some(grpo_advantages())),
        ("loss masks", || Some(loss_masks())),
        ("collection rounds on synthetic corpus", || {
            Some(algorithm_one())
        }),
        ("curriculum bins", || Some(curriculum())),
        ("hardness distribution", hardness_distribution),
        ("interaction budget", || Some(interaction_budget())),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Some(Err("panicked".into())));
        let ms = start.elapsed().as_millis();
        match result {
            Some(Ok(detail)) => println!("PASS {name} ({ms} ms): {detail}"),
            Some(Err(detail)) => {
                failed += 1;
                println!("FAIL {name} ({ms} ms): {detail}");
            }
            None => println!("SKIP {name}: set SPARC_DIR or COSQL_DIR to a local dataset copy"),
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
