use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn agealign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agealign")).args(args).output().expect("spawn agealign")
}

fn ok(args: &[&str]) -> String {
    let out = agealign(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_lines(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

/// 60 words `w00..w59` with AoA 3.0..14.8 and 40 cue/association records.
fn write_inputs(dir: &Path) {
    let mut lex = String::from("word,aoa_years,morph_count,definition\n");
    for i in 0..60 {
        lex.push_str(&format!("w{i:02},{:.1},{},meaning number {i}\n", 3.0 + 0.2 * i as f64, i % 6));
    }
    fs::write(dir.join("aoa.csv"), lex).unwrap();
    let relations = ["synonym", "antonym", "function", "category", "part-whole"];
    let mut wax = String::from("cue,association,relation,explanation\n");
    for i in 0..40 {
        wax.push_str(&format!("w{:02},w{:02},{},they are linked\n", i, (i + 20) % 60, relations[i % 5]));
    }
    fs::write(dir.join("wax.csv"), wax).unwrap();
}

#[test]
fn pipeline_from_build_to_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let run = dir.join("run");
    fs::create_dir(&run).unwrap();
    write_inputs(dir);
    let questions = run.join("questions.jsonl");
    ok(&["build", "wc", "--wax", p(&dir.join("wax.csv")), "--aoa", p(&dir.join("aoa.csv")), "--seed", "7", "--out", p(&questions)]);
    let again = dir.join("again.jsonl");
    ok(&["build", "wc", "--wax", p(&dir.join("wax.csv")), "--aoa", p(&dir.join("aoa.csv")), "--seed", "7", "--out", p(&again)]);
    assert_eq!(fs::read(&questions).unwrap(), fs::read(&again).unwrap());
    let qs = read_lines(&questions);
    assert_eq!(qs.len(), 40);

    // Canned replies: the gold pair for young questions, two distractors otherwise.
    let mut canned = String::new();
    for q in &qs {
        let gold: Vec<&str> = q["gold_pair"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
        let words: Vec<&str> = q["words_presented"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
        let text = if q["pair_aoa"].as_f64().unwrap() <= 9.0 {
            format!("{} and {} because they are linked", gold[0], gold[1])
        } else {
            let wrong: Vec<&str> = words.iter().copied().filter(|w| !gold.contains(w)).collect();
            format!("{} and {}", wrong[0], wrong[1])
        };
        canned.push_str(&serde_json::json!({"question_id": q["id"], "text": text}).to_string());
        canned.push('\n');
    }
    let stub = dir.join("stub.jsonl");
    fs::write(&stub, canned).unwrap();

    let responses = run.join("responses.jsonl");
    ok(&[
        "administer", "--questions", p(&questions), "--protocol", "slp", "--model", "stub", "--ceiling", "0",
        "--stub", p(&stub), "--out", p(&responses),
    ]);
    let outcomes = read_lines(&run.join("outcomes.jsonl"));
    assert_eq!(outcomes.len(), 40);
    for (o, q) in outcomes.iter().zip(&qs) {
        let expected = u64::from(q["pair_aoa"].as_f64().unwrap() <= 9.0);
        assert_eq!(o["h"].as_u64().unwrap(), expected, "{}", q["id"]);
    }
    let rs = read_lines(&responses);
    assert!(rs.iter().all(|r| r["fingerprint"].is_string()));

    // Under the ceiling rule items go easiest first, so the run stops after
    // the young questions plus four misses.
    let ceiling_dir = dir.join("ceiling");
    fs::create_dir(&ceiling_dir).unwrap();
    ok(&[
        "administer", "--questions", p(&questions), "--model", "stub", "--stub", p(&stub),
        "--out", p(&ceiling_dir.join("responses.jsonl")),
    ]);
    let young = qs.iter().filter(|q| q["pair_aoa"].as_f64().unwrap() <= 9.0).count();
    let ceiling_outcomes = read_lines(&ceiling_dir.join("outcomes.jsonl"));
    assert_eq!(ceiling_outcomes.len(), young + 4);
    assert!(ceiling_outcomes[..young].iter().all(|o| o["h"] == 1));
    assert!(ceiling_outcomes[young..].iter().all(|o| o["h"] == 0));

    // Age test on stdout; the report writes the same bytes.
    let cli_exact = ok(&["age-test", "--outcomes", p(&run.join("outcomes.jsonl")), "--mode", "exact", "--test", "means"]);
    let cli_at_most = ok(&["age-test", "--outcomes", p(&run.join("outcomes.jsonl")), "--mode", "at-most"]);
    let profile: Value = serde_json::from_str(&cli_exact).unwrap();
    assert!(profile.get("min_aligned_age").is_some());

    let features = dir.join("features.jsonl");
    ok(&["annotate", "--questions", p(&questions), "--responses", p(&responses), "--aoa", p(&dir.join("aoa.csv")), "--out", p(&features)]);
    let fv = read_lines(&features);
    assert_eq!(fv.len(), 40);
    assert!(fv.iter().all(|f| f["morph_count"].is_u64() && f["pair_aoa"].is_f64()));
    let analysis: Value =
        serde_json::from_str(&ok(&["analyze", "--design", p(&features), "--outcomes", p(&run.join("outcomes.jsonl"))])).unwrap();
    assert_eq!(analysis["n_rows"], 40);

    ok(&["report", "--run", p(&run)]);
    assert_eq!(fs::read_to_string(run.join("age_test_exact.json")).unwrap(), cli_exact);
    assert_eq!(fs::read_to_string(run.join("age_test_at_most.json")).unwrap(), cli_at_most);
    let report: Value = serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert!(report["min_aligned_age"].get("exact").is_some());
    let first = fs::read(run.join("report.json")).unwrap();
    ok(&["report", "--run", p(&run)]);
    assert_eq!(fs::read(run.join("report.json")).unwrap(), first);

    let sim: Value = serde_json::from_str(&ok(&[
        "simulate", "--outcomes", p(&run.join("outcomes.jsonl")), "--rho-grid", "0,0.5", "--trials", "5", "--seed", "3",
        "--mode", "at-most", "--ages", "7..10",
    ]))
    .unwrap();
    assert_eq!(sim["cells"].as_array().unwrap().len(), 8);
}

#[test]
fn definitions_build_and_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_inputs(dir);
    let questions = dir.join("def.jsonl");
    ok(&["build", "def", "--aoa", p(&dir.join("aoa.csv")), "--seed", "1", "--out", p(&questions)]);
    let qs = read_lines(&questions);
    assert_eq!(qs.len(), 60);
    assert!(qs.iter().all(|q| q["choices"].as_array().unwrap().len() == 4));
    let mut canned = String::new();
    for q in &qs {
        canned.push_str(&serde_json::json!({"question_id": q["id"], "text": q["target"]}).to_string());
        canned.push('\n');
    }
    let stub = dir.join("stub.jsonl");
    fs::write(&stub, canned).unwrap();
    let grid = dir.join("grid.json");
    fs::write(
        &grid,
        r#"{"protocols": ["slp", "comp"], "samplings": [
            {"model_id": "m", "top_p": 0.95, "temperature": 1.0, "max_tokens": 32},
            {"model_id": "m", "top_p": 1.0, "temperature": 0.0, "max_tokens": 32}]}"#,
    )
    .unwrap();
    let report: Value =
        serde_json::from_str(&ok(&["sweep", "--questions", p(&questions), "--grid", p(&grid), "--stub", p(&stub)])).unwrap();
    assert_eq!(report["configs"].as_array().unwrap().len(), 4);
    assert!(report["configs"].as_array().unwrap().iter().all(|c| c["percent"] == 100.0));
    assert_eq!(report["score_std_dev"], 0.0);
}

#[test]
fn age_lookup_and_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let norms = dir.join("norms.json");
    fs::write(
        &norms,
        r#"{"subtests": {"wc": {"max_score": 40, "entries": [
            {"min": 0, "max": 4, "age": "< 3"},
            {"min": 5, "max": 19, "age": "5:2"},
            {"min": 20, "max": 20, "age": "7:5"},
            {"min": 21, "max": 38, "age": "12:0"},
            {"min": 39, "max": 40, "age": "21:5+"}]}}}"#,
    )
    .unwrap();
    let v: Value = serde_json::from_str(&ok(&["age", "--norms", p(&norms), "--subtest", "wc", "--score", "20"])).unwrap();
    assert_eq!(v["age"], "7:5");
    assert_eq!(v["percent"], 50.0);
    let v: Value = serde_json::from_str(&ok(&["age", "--norms", p(&norms), "--subtest", "wc", "--score", "40"])).unwrap();
    assert_eq!(v["age"], "21:5+");
    let bad = agealign(&["age", "--norms", p(&norms), "--subtest", "wc", "--score", "41"]);
    assert!(!bad.status.success());

    let (a, b) = (dir.join("a.json"), dir.join("b.jsonl"));
    let va: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 3) as f64, 0.0]).collect();
    fs::write(&a, serde_json::to_string(&va).unwrap()).unwrap();
    let vb: String = (0..30).map(|i| format!("[{}, 0.0]\n", (i % 3) as f64)).collect();
    fs::write(&b, vb).unwrap();
    let v: Value = serde_json::from_str(&ok(&["energy", "--embeddings-a", p(&a), "--embeddings-b", p(&b), "--seed", "1"])).unwrap();
    assert_eq!(v["k"], 3);
    // Identical label distributions.
    assert!(v["energy_distance"].as_f64().unwrap().abs() < 0.05);
}

#[test]
fn usage_errors_exit_nonzero() {
    let out = agealign(&["age-test", "--outcomes", "/nonexistent/outcomes.jsonl"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let out = agealign(&["age-test", "--outcomes", "x.jsonl", "--test", "td"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--human"));
    let tmp = tempfile::tempdir().unwrap();
    let out = agealign(&["report", "--run", p(tmp.path())]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("questions.jsonl") && err.contains("outcomes.jsonl"), "{err}");
}
