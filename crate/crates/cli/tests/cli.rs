use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mafia() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mafia"));
    c.env_remove("MAFIA_TARGET");
    c
}

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(name)
}

fn text(o: &[u8]) -> String {
    String::from_utf8_lossy(o).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "stderr: {}", text(&o.stderr));
    o
}

fn gen_trace(dir: &Path, scenario: &str, packets: u32, seed: u64) -> PathBuf {
    let p = dir.join(format!("{scenario}-{seed}.jsonl"));
    ok(mafia()
        .args([
            "trace-gen",
            "--scenario",
            scenario,
            "--packets",
            &packets.to_string(),
            "--seed",
            &seed.to_string(),
            "-o",
        ])
        .arg(&p)
        .output()
        .unwrap());
    p
}

const HH_DEFINES: [&str; 8] = [
    "-D",
    "mment_interval=5",
    "-D",
    "PORT=1",
    "-D",
    "THRESHOLD=50",
    "-D",
    "HH_VOLUME=1",
];

#[test]
fn compile_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let o = ok(mafia()
        .arg("compile")
        .arg(corpus("heavy_hitter.mafia"))
        .args(HH_DEFINES)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap());
    let stdout = text(&o.stdout);
    assert!(stdout.contains("Pipeline depth"), "{stdout}");
    for ext in ["ir.json", "p4", "report.json"] {
        assert!(dir.path().join(format!("heavy_hitter.{ext}")).exists(), "{ext}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("heavy_hitter.report.json")).unwrap()).unwrap();
    assert!(report["depth"].as_u64().unwrap() <= 24);
}

#[test]
fn compile_one_file_per_role() {
    let dir = tempfile::tempdir().unwrap();
    ok(mafia()
        .arg("compile")
        .arg(corpus("topk_congested.mafia"))
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap());
    for role in ["first-hop", "intermediate", "last-hop"] {
        assert!(dir.path().join(format!("topk_congested.{role}.p4")).exists(), "{role}");
    }
    ok(mafia()
        .arg("compile")
        .arg(corpus("topk_congested.mafia"))
        .args(["--role", "last-hop", "--out-dir"])
        .arg(dir.path().join("one"))
        .output()
        .unwrap());
    assert_eq!(std::fs::read_dir(dir.path().join("one")).unwrap().count(), 3);
}

#[test]
fn syntax_errors_point_at_the_source() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.mafia");
    std::fs::write(&p, "c = Counter(width=32)\npkts >> c.set(c + )\n").unwrap();
    let o = mafia().arg("compile").arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = text(&o.stderr);
    assert!(err.contains("bad.mafia:2:"), "{err}");
    assert!(err.contains("error:"), "{err}");
}

#[test]
fn undeclared_state_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("undeclared.mafia");
    std::fs::write(&p, "pkts >> nope.set(nope + 1)\n").unwrap();
    let o = mafia()
        .arg("compile")
        .arg(&p)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("nope"), "{}", text(&o.stderr));
    assert!(!dir.path().join("undeclared.p4").exists());
}

#[test]
fn missing_constant_is_an_error() {
    let o = mafia()
        .arg("compile")
        .arg(corpus("stochastic_sampling.mafia"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("SamplingRatio"), "{}", text(&o.stderr));
}

#[test]
fn tiny_target_warns_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("tiny.json");
    std::fs::write(&target, r#"{"name":"tiny","stages":2,"width":4}"#).unwrap();
    let o = ok(mafia()
        .arg("compile")
        .arg(corpus("heavy_hitter.mafia"))
        .args(HH_DEFINES)
        .arg("--out-dir")
        .arg(dir.path())
        .env("MAFIA_TARGET", &target)
        .output()
        .unwrap());
    let err = text(&o.stderr);
    assert!(err.contains("warning:") && err.contains("tiny"), "{err}");
}

#[test]
fn random_programs_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let trace = gen_trace(dir.path(), "sampling", 50, 1);
    let o = mafia()
        .args(["run", "-D", "SamplingRatio=10", "--program"])
        .arg(corpus("stochastic_sampling.mafia"))
        .arg("--trace")
        .arg(&trace)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("--seed"));
}

#[test]
fn trace_gen_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok(mafia()
        .args(["trace-gen", "--scenario", "mixed", "--packets", "200", "--seed", "5"])
        .output()
        .unwrap());
    let b = ok(mafia()
        .args(["trace-gen", "--scenario", "mixed", "--packets", "200", "--seed", "5"])
        .output()
        .unwrap());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(text(&a.stdout).lines().count(), 200);
    let bad = mafia().args(["trace-gen", "--scenario", "nope"]).output().unwrap();
    assert!(!bad.status.success());
    drop(dir);
}

/// Sink digest of the heavy hitter program on a seeded trace. A change here
/// means the trace generator, hashing or interpreter changed behavior.
const HH_GOLDEN: &str = "7173ba857bab8bc7e1c2e228ae1fd7ffa1745940372233b2b6d5f0468326437e";

#[test]
fn heavy_hitter_golden_digest() {
    let dir = tempfile::tempdir().unwrap();
    let trace = gen_trace(dir.path(), "heavy-hitter", 2000, 42);
    let mut digests = Vec::new();
    for engine in ["ast", "ir"] {
        let report = dir.path().join(format!("{engine}.json"));
        ok(mafia()
            .args(["run", "--seed", "42", "--engine", engine, "--program"])
            .arg(corpus("heavy_hitter.mafia"))
            .args(HH_DEFINES)
            .arg("--trace")
            .arg(&trace)
            .arg("--sink-dir")
            .arg(dir.path().join(engine))
            .arg("--report")
            .arg(&report)
            .output()
            .unwrap());
        let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(r["emitted"]["CONTROLLER"], 1);
        digests.push(r["digest"].as_str().unwrap().to_string());
    }
    assert_eq!(digests[0], digests[1]);
    assert_eq!(digests[0], HH_GOLDEN);

    // The one alarm is where exact byte counts first put a flow over half
    // of the port's bytes.
    let mut total = 0u64;
    let mut bytes = std::collections::BTreeMap::<String, u64>::new();
    let mut first = None;
    for (i, line) in std::fs::read_to_string(&trace).unwrap().lines().enumerate() {
        let r: serde_json::Value = serde_json::from_str(line).unwrap();
        if r["meta"]["input_port"] != 1 {
            continue;
        }
        let size = r["meta"]["size"].as_u64().unwrap();
        total += size;
        let b = bytes.entry(r["headers"].to_string()).or_default();
        *b += size;
        if *b * 100 > 50 * total {
            first = Some(i);
            break;
        }
    }
    let sink = std::fs::read_to_string(dir.path().join("ast/CONTROLLER.jsonl")).unwrap();
    let alarm: serde_json::Value = serde_json::from_str(sink.lines().next().unwrap()).unwrap();
    assert_eq!(alarm["packet_index"].as_u64().map(|x| x as usize), first);
    assert_eq!(
        std::fs::read(dir.path().join("ast/CONTROLLER.jsonl")).unwrap(),
        std::fs::read(dir.path().join("ir/CONTROLLER.jsonl")).unwrap()
    );
}

#[test]
fn topology_runs_a_chain() {
    let dir = tempfile::tempdir().unwrap();
    let trace = gen_trace(dir.path(), "mixed", 100, 3);
    let topo = dir.path().join("topo.json");
    let program = corpus("postcards.mafia");
    let switches: Vec<serde_json::Value> = (1..=3)
        .map(|id| serde_json::json!({"switch_id": id, "program": program}))
        .collect();
    std::fs::write(
        &topo,
        serde_json::json!({"switches": switches, "sinks": {"COLLECTOR": "out/postcards.jsonl"}}).to_string(),
    )
    .unwrap();
    let o = ok(mafia()
        .arg("run")
        .arg("--topology")
        .arg(&topo)
        .arg("--trace")
        .arg(&trace)
        .output()
        .unwrap());
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["switches"].as_array().unwrap().len(), 3);
    let lines = std::fs::read_to_string(dir.path().join("out/postcards.jsonl")).unwrap();
    // One postcard per switch for every data packet.
    let data = std::fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .filter(|l| !l.contains("\"ctrl\""))
        .count();
    assert_eq!(lines.lines().count(), 3 * data);
}

#[test]
fn corpus_matrix() {
    let o = ok(mafia()
        .args(["corpus", "cardinality", "--packets", "300"])
        .output()
        .unwrap());
    let out = text(&o.stdout);
    assert!(
        out.contains("cardinality_pcsa") && out.contains("cardinality_hll"),
        "{out}"
    );
    assert!(out.contains("2/2 programs pass"), "{out}");
    assert!(!out.contains("FAIL"));

    let o = ok(mafia().args(["corpus", "--packets", "500"]).output().unwrap());
    assert!(text(&o.stdout).contains("13/13 programs pass"), "{}", text(&o.stdout));

    let o = ok(mafia().args(["corpus", "no-such-program"]).output().unwrap());
    assert!(text(&o.stdout).contains("0/0"));
}
