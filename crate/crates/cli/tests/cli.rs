use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mosaic_core::ImageRgb;

fn mosaic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mosaic"))
        .args(args)
        .env_remove("MOSAIC_ENDPOINT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn image(dir: &Path) -> PathBuf {
    let path = dir.join("in.png");
    let data = (0..24u32 * 24)
        .flat_map(|i| [(i % 200) as u8 + 20, (i / 24 * 5) as u8, 90])
        .collect();
    ImageRgb::new(24, 24, data).unwrap().save(&path).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const PROMPT: &str = "tree as oil, car as ink and dog as oil";

#[test]
fn parse_prints_serialized_pairs() {
    let o = mosaic(&[
        "parse",
        "--prompt",
        "a cat in watercolor style and a dog as oil painting",
    ]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "a cat <PAIR> watercolor <SEP> a dog <PAIR> oil painting\n"
    );
}

#[test]
fn parse_errors_exit_4() {
    let o = mosaic(&["parse", "--prompt", "blue sky"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("style marker"));
}

#[test]
fn run_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let img = image(tmp.path());
    let out = tmp.path().join("out");
    let o = mosaic(&[
        "run",
        "--image",
        s(&img),
        "--prompt",
        PROMPT,
        "--out",
        s(&out),
        "--overlap-policy",
        "first-wins",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "composite.png",
        "manifest.json",
        "masks/mask_002.png",
        "frames/style_001.png",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert!(!out.join("frames/style_002.png").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["policy"]["overlap"], "first-wins");
    assert_eq!(manifest["pairs"].as_array().unwrap().len(), 3);

    let o = mosaic(&[
        "eval",
        "--run-dir",
        s(&out),
        "--seed",
        "5",
        "--scale",
        "2.5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let agg = report["aggregate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&agg));
    assert!((report["aggregate_scaled"].as_f64().unwrap() - 2.5 * agg).abs() < 1e-12);
    assert_eq!(report["seed"], 5);
    assert!(report["crop_rule"].as_str().unwrap().contains("16"));

    let file = tmp.path().join("report.json");
    let o = mosaic(&[
        "eval",
        "--image",
        s(&out.join("composite.png")),
        "--prompt",
        PROMPT,
        "--masks",
        s(&out.join("masks")),
        "--seed",
        "5",
        "--scale",
        "2.5",
        "--out",
        s(&file),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let direct: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!(direct, report);
}

#[test]
fn missing_inputs_and_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mosaic(&["run", "--prompt", PROMPT]);
    assert_eq!(o.status.code(), Some(2));
    let o = mosaic(&[
        "run",
        "--image",
        "/definitely/missing.png",
        "--prompt",
        PROMPT,
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("[load]"));
    assert!(!tmp.path().join("o").exists());
    let o = mosaic(&["eval", "--run-dir", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing artifacts"));
    let o = mosaic(&[
        "run",
        "--image",
        "x.png",
        "--prompt",
        PROMPT,
        "--uncovered",
        "sometimes",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let img = image(tmp.path());
    let cfg = tmp.path().join("mosaic.toml");
    std::fs::write(
        &cfg,
        format!("image = {:?}\nprompt = \"tree as oil\"\nout_dir = {:?}\nseed = 3\n[cache]\ncapacity = 2\n", img, tmp.path().join("from-file")),
    )
    .unwrap();
    let flag_out = tmp.path().join("from-flag");
    let o = mosaic(&[
        "run",
        "--config",
        s(&cfg),
        "--out",
        s(&flag_out),
        "--prompt",
        PROMPT,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!tmp.path().join("from-file").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(flag_out.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["seed"], 3);
    assert_eq!(manifest["config"]["cache_capacity"], 2);
    assert_eq!(manifest["config"]["prompt"], PROMPT);

    std::fs::write(&cfg, "image = \"a.png\"\ncolour = \"red\"\n").unwrap();
    let o = mosaic(&["run", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));
}

#[test]
fn endpoint_from_environment() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let tmp = tempfile::tempdir().unwrap();
    let img = image(tmp.path());
    let o = Command::new(env!("CARGO_BIN_EXE_mosaic"))
        .args([
            "run",
            "--backend",
            "http",
            "--image",
            s(&img),
            "--prompt",
            PROMPT,
            "--out",
            s(&tmp.path().join("o")),
        ])
        .env("MOSAIC_ENDPOINT", format!("http://127.0.0.1:{port}"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains(&port.to_string()) || stderr(&o).contains("unavailable"));
    let o = mosaic(&[
        "run",
        "--backend",
        "http",
        "--image",
        s(&img),
        "--prompt",
        PROMPT,
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("endpoint"));
}

#[test]
fn bench_prints_stage_table() {
    let tmp = tempfile::tempdir().unwrap();
    let img = image(tmp.path());
    let o = mosaic(&[
        "bench",
        "--image",
        s(&img),
        "--prompt",
        PROMPT,
        "--iterations",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for stage in [
        "parse",
        "encode_text",
        "encode_image",
        "mask",
        "stylize",
        "composite",
    ] {
        assert!(
            text.lines().any(|l| l.starts_with(stage)),
            "{stage} missing:\n{text}"
        );
    }
    let o = mosaic(&[
        "bench",
        "--image",
        s(&img),
        "--prompt",
        PROMPT,
        "--iterations",
        "3",
        "--json",
        "--no-cache",
    ]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let image_row = report["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["stage"] == "encode_image")
        .unwrap();
    assert_eq!(image_row["warm_invocations"], 2);
    let stylize = report["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["stage"] == "stylize")
        .unwrap();
    assert_eq!(stylize["total_invocations"], 6);
}

#[test]
fn corpus_gen_writes_jsonl() {
    let tmp = tempfile::tempdir().unwrap();
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data");
    let out = tmp.path().join("corpus.jsonl");
    let run = |out: &Path| {
        mosaic(&[
            "corpus",
            "gen",
            "--classes",
            s(&data.join("classes.txt")),
            "--styles",
            s(&data.join("styles.txt")),
            "--templates",
            s(&data.join("templates.txt")),
            "--count",
            "50",
            "--seed",
            "9",
            "--out",
            s(out),
        ])
    };
    let o = run(&out);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 50);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for key in ["prompt", "pairs", "template_id", "seed"] {
        assert!(first.get(key).is_some(), "{key}");
    }
    let again = tmp.path().join("again.jsonl");
    run(&again);
    assert_eq!(std::fs::read(&again).unwrap(), text.into_bytes());
}
