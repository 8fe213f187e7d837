use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn learnfuzz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_learnfuzz")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = learnfuzz(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn hosts_extract_and_check() {
    let dir = tempfile::tempdir().unwrap();
    let hosts = dir.path().join("hosts");
    ok(&["hosts", "--out", p(&hosts)]);
    for h in ["host1", "host2", "host3"] {
        let stdout = ok(&["check", "--in", p(&hosts.join(format!("{h}.pdf")))]);
        assert!(stdout.contains("PASS"), "{stdout}");
    }
    let objects = dir.path().join("objects.txt");
    let stdout = ok(&["extract", "--in", p(&hosts), "--out", p(&objects)]);
    assert_eq!(stdout.trim(), "extracted 17 objects");
    let text = fs::read_to_string(&objects).unwrap();
    assert_eq!(text.matches("%%OBJ%%\n").count(), 17);

    ok(&["extract", "--in", p(&hosts), "--out", p(&objects), "--min-len", "60"]);
    let long = fs::read_to_string(&objects).unwrap();
    assert!(long.matches("%%OBJ%%").count() < 17);
}

#[test]
fn check_reports_failures_and_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.txt");
    let bad = dir.path().join("bad.txt");
    fs::write(&good, "125 0 obj [680.6 680.6] endobj").unwrap();
    fs::write(&bad, "125 0 obj [680.6 endobj").unwrap();
    let cov = dir.path().join("cov.json");
    let stdout = ok(&["check", "--in", p(&good), "--strict", "--coverage-out", p(&cov)]);
    assert!(stdout.starts_with("PASS\ncoverage: "), "{stdout}");
    let points: Vec<String> = serde_json::from_str(&fs::read_to_string(&cov).unwrap()).unwrap();
    assert!(!points.is_empty());
    let keys: Vec<(&str, u32)> = points
        .iter()
        .map(|pt| {
            let (unit, id) = pt.split_once(':').unwrap();
            (unit, id.parse().unwrap())
        })
        .collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]), "{points:?}");
    assert_eq!(points.len(), stdout.lines().nth(1).unwrap().split_whitespace().nth(1).unwrap().parse::<usize>().unwrap());

    let out = learnfuzz(&["check", "--in", p(&bad), "--strict"]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("PARSE-ERROR: unbalanced-delimiter at offset"), "{stdout}");
    assert!(stdout.contains("FAIL"));
}

#[test]
fn fuzz_then_assemble() {
    let dir = tempfile::tempdir().unwrap();
    let objs = dir.path().join("objs");
    fs::create_dir(&objs).unwrap();
    fs::write(objs.join("a.txt"), "obj << /Type /Pages >> endobj").unwrap();
    fs::write(objs.join("b.txt"), "7 0 obj [1 2 3] endobj").unwrap();

    let fuzzed = dir.path().join("fuzzed");
    ok(&["fuzz", "--in", p(&objs), "--variants", "3", "--fuzz-factor", "10", "--seed", "3", "--out", p(&fuzzed)]);
    let mut names: Vec<String> = fs::read_dir(&fuzzed).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["a.v00.txt", "a.v01.txt", "a.v02.txt", "b.v00.txt", "b.v01.txt", "b.v02.txt"]);
    assert_eq!(fs::read(fuzzed.join("b.v01.txt")).unwrap().len(), 22);

    let pdfs = dir.path().join("pdfs");
    ok(&["assemble", "--host", "host1", "--objects", p(&objs), "--out", p(&pdfs)]);
    for name in ["host1_a.pdf", "host1_b.pdf"] {
        let stdout = ok(&["check", "--in", p(&pdfs.join(name))]);
        assert!(stdout.contains("PASS"));
    }
}

#[test]
fn train_generate_and_campaign() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.txt");
    ok(&["synth", "--n", "40", "--out", p(&corpus)]);
    let ckpt = dir.path().join("ckpt");
    ok(&[
        "train", "--corpus", p(&corpus), "--d", "16", "--epochs", "2", "--checkpoint-epochs", "1,2", "--seed", "1", "--tiny",
        "--out", p(&ckpt),
    ]);
    assert!(ckpt.join("epoch1.bin").exists() && ckpt.join("epoch2.bin").exists());

    let gen = dir.path().join("gen");
    ok(&[
        "generate", "--ckpt", p(&ckpt.join("epoch2.bin")), "--mode", "samplefuzz", "--n", "3", "--seed", "7", "--maxlen", "300",
        "--out", p(&gen),
    ]);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(gen.join("manifest.json")).unwrap()).unwrap();
    let entries = manifest.as_array().unwrap();
    assert_eq!(entries.len(), 3);
    for e in entries {
        assert_eq!(e["mode"], "samplefuzz");
        assert!(e["fuzzed_positions"].is_array());
        if let Some(f) = e["file"].as_str() {
            assert!(fs::read(gen.join(f)).unwrap().starts_with(b"obj "));
        }
    }

    let config = dir.path().join("campaign.toml");
    fs::write(
        &config,
        "[[campaign]]\ngenerator = { kind = \"baseline\", corpus = \"corpus.txt\" }\nn_objects = 5\n\n\
         [[campaign]]\nname = \"model\"\nn_objects = 2\nhosts = [2]\n\
         generator = { kind = \"model\", mode = \"sample\", checkpoint = \"ckpt/epoch2.bin\", max_len = 200 }\n",
    )
    .unwrap();
    let results = dir.path().join("results");
    ok(&["campaign", "--config", p(&config), "--out", p(&results)]);
    for f in ["summary.json", "table.txt", "matrix.txt", "crashes.log"] {
        assert!(results.join(f).exists(), "{f}");
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(results.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["campaigns"][0]["name"], "baseline");
    assert_eq!(summary["campaigns"][0]["pass_rate"], 1.0);
    assert_eq!(summary["campaigns"][0]["tests"], 15);
}

#[test]
fn bad_inputs_are_reported() {
    let out = learnfuzz(&["generate", "--ckpt", "/nonexistent/ckpt.bin", "--out", "/tmp/never"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
    let out = learnfuzz(&["generate", "--ckpt", "x", "--mode", "beam", "--out", "y"]);
    assert!(!out.status.success());
}
