use std::path::Path;
use std::process::{Command, Output};

fn tsr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsr"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn generated() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    assert!(tsr(dir.path(), &["generate", "-o", ".", "--tables", "6"]).status.success());
    dir
}

#[test]
fn perfect_detections_score_one() {
    let dir = generated();
    let rec = tsr(dir.path(), &["reconstruct", "pred.json", "-o", "html"]);
    assert!(rec.status.success());
    assert_eq!(stdout(&rec).trim(), "wrote 6 of 6 tables");

    let teds = tsr(dir.path(), &["teds", "html", "gt.json"]);
    assert_eq!(teds.status.code(), Some(0));
    assert!(stdout(&teds).contains("Overall  1.0000  (n=6)"), "{}", stdout(&teds));

    let coco = tsr(dir.path(), &["coco-eval", "pred.json", "gt.json"]);
    assert_eq!(coco.status.code(), Some(0));
    assert!(stdout(&coco).starts_with("AP = 1.0000\n"), "{}", stdout(&coco));
}

#[test]
fn encode_then_decode_restores_ground_truth_instances() {
    let dir = generated();
    assert!(tsr(dir.path(), &["encode-labels", "gt.json", "-o", "enc.json"]).status.success());
    assert!(tsr(dir.path(), &["decode-labels", "enc.json", "-o", "dec.json"]).status.success());
    let read = |name: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(name)).unwrap()).unwrap()
    };
    let (gt, dec, enc) = (read("gt.json"), read("dec.json"), read("enc.json"));
    assert_eq!(enc["label_mode"], "single");
    assert_eq!(dec["label_mode"], "multi");
    let key = |v: &serde_json::Value| {
        let mut boxes: Vec<String> = v["images"][0]["instances"]
            .as_array()
            .unwrap()
            .iter()
            .map(|i| format!("{}|{}", i["bbox"], i["class_id"]))
            .collect();
        boxes.sort();
        boxes
    };
    assert_eq!(key(&gt), key(&dec));
}

#[test]
fn missing_prediction_file_is_a_record_failure() {
    let dir = generated();
    assert!(tsr(dir.path(), &["reconstruct", "pred.json", "-o", "html"]).status.success());
    let victim = std::fs::read_dir(dir.path().join("html")).unwrap().next().unwrap().unwrap().path();
    std::fs::remove_file(victim).unwrap();
    let o = tsr(dir.path(), &["teds", "html", "gt.json"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("1 record(s) failed"));
}

#[test]
fn schema_violation_exits_with_schema_code() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"schema_version":1,"label_mode":"multi","images":[{"image_id":"a","width":10,"height":10,"instances":[{"bbox":[0,0,1],"class_id":0}]}]}"#,
    )
    .unwrap();
    let o = tsr(dir.path(), &["stats", "bad.json"]);
    assert_eq!(o.status.code(), Some(7));
    assert!(String::from_utf8_lossy(&o.stderr).contains("images[0]"));
}

#[test]
fn missing_input_exits_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(tsr(dir.path(), &["stats", "nope.json"]).status.code(), Some(8));
}

#[test]
fn bad_arguments_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(tsr(dir.path(), &["misalign", "gt.json", "--spec", "wobble:1"]).status.code(), Some(2));
}

#[test]
fn kernels_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = tsr(dir.path(), &["kernels-check"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.lines().all(|l| l.starts_with("PASS ")), "{out}");
}
