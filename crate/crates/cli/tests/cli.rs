use std::path::Path;
use std::process::{Command, Output};

fn walkstreet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_walkstreet")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--out-dir", s(dir), "--n-segments", "60", "--photos-median", "40"];
    args.extend_from_slice(extra);
    let out = walkstreet(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn inputs(dir: &Path) -> Vec<String> {
    ["streets.geojson", "photos.jsonl", "venues.jsonl"]
        .iter()
        .zip(["--streets", "--photos", "--venues"])
        .flat_map(|(f, flag)| [flag.to_string(), dir.join(f).display().to_string()])
        .collect()
}

fn with_inputs<'a>(dir: &'a [String], cmd: &[&'a str]) -> Vec<&'a str> {
    cmd.iter().copied().chain(dir.iter().map(String::as_str)).collect()
}

#[test]
fn run_is_byte_identical_across_invocations() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &["--seed", "5"]);
    let inp = inputs(&data);
    for out in ["a", "b"] {
        let dir = tmp.path().join(out);
        let mut args = with_inputs(&inp, &["run"]);
        args.extend(["--out-dir", s(&dir)]);
        let o = walkstreet(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let names: Vec<_> = std::fs::read_dir(tmp.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(names.len() >= 10);
    for n in names {
        assert_eq!(
            std::fs::read(tmp.path().join("a").join(&n)).unwrap(),
            std::fs::read(tmp.path().join("b").join(&n)).unwrap(),
            "{n:?}"
        );
    }
}

#[test]
fn synth_seed_controls_output() {
    let tmp = tempfile::tempdir().unwrap();
    synth(&tmp.path().join("x"), &["--seed", "1"]);
    synth(&tmp.path().join("y"), &["--seed", "1"]);
    synth(&tmp.path().join("z"), &["--seed", "2"]);
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("photos.jsonl")).unwrap();
    assert_eq!(read("x"), read("y"));
    assert_ne!(read("x"), read("z"));
}

#[test]
fn staged_commands_compose() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &[]);
    let inp = inputs(&data);
    let assign = tmp.path().join("assign.csv");
    let staged = tmp.path().join("features.csv");
    let out = tmp.path().join("run");
    assert!(walkstreet(&[with_inputs(&inp, &["join"]), vec!["-o", s(&assign)]].concat()).status.success());
    let o = walkstreet(&[with_inputs(&inp, &["features", "--assignments", s(&assign)]), vec!["-o", s(&staged)]].concat());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(walkstreet(&[with_inputs(&inp, &["run", "--out-dir", s(&out)])].concat()).status.success());
    assert_eq!(std::fs::read(&staged).unwrap(), std::fs::read(out.join("features.csv")).unwrap());
}

#[test]
fn single_output_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &[]);
    let inp = inputs(&data);
    let stdout = |cmd: &[&str]| {
        let o = walkstreet(&with_inputs(&inp, cmd));
        assert!(o.status.success(), "{cmd:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    assert!(stdout(&["ingest"]).contains("\"segments\": 60"));
    assert!(stdout(&["metrics"]).starts_with("segment_id,walkability,safety,night_fraction"));
    assert!(stdout(&["curve", "--metric", "photo_at_night"]).starts_with("threshold,n_segments,r\n1,60,"));
    assert_eq!(stdout(&["bins", "--metric", "manhood"]).lines().count(), 5);
    assert_eq!(stdout(&["bins", "--metric", "manhood", "--k", "2"]).lines().count(), 3);
    let reg: serde_json::Value = serde_json::from_str(&stdout(&["regress", "--target", "safety"])).unwrap();
    assert_eq!(reg["reference_category"], "travel");
    let scored: serde_json::Value = serde_json::from_str(&stdout(&["score"])).unwrap();
    let f0 = &scored["features"][0]["properties"];
    assert!(f0["color"].as_str().unwrap().starts_with('#'));
    assert!(f0["composite_walkability"].is_f64());
}

#[test]
fn config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &[]);
    let cfg = tmp.path().join("walk.toml");
    std::fs::write(
        &cfg,
        format!(
            "streets = {:?}\nphotos = {:?}\nthresholds = [1, 5]\n",
            data.join("streets.geojson"),
            data.join("photos.jsonl")
        ),
    )
    .unwrap();
    let o = walkstreet(&["curve", "--config", s(&cfg), "--metric", "manhood"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 3);
    let o = walkstreet(&["curve", "--config", s(&cfg), "--metric", "manhood", "--thresholds", "1,2,3,4"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 5);
    std::fs::write(&cfg, "no-such-key = 1\n").unwrap();
    assert_eq!(walkstreet(&["ingest", "--config", s(&cfg)]).status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    // Input errors.
    assert_eq!(walkstreet(&["ingest", "--streets", "/nonexistent.geojson"]).status.code(), Some(1));
    assert_eq!(walkstreet(&["ingest"]).status.code(), Some(1));
    assert_eq!(walkstreet(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(walkstreet(&["ingest", "--buffer-radius", "-3"]).status.code(), Some(1));
    assert_eq!(walkstreet(&["--help"]).status.code(), Some(0));

    // A single segment leaves every z-metric degenerate.
    let streets = tmp.path().join("one.geojson");
    std::fs::write(
        &streets,
        r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{"id":"a","safety":3.0,"walkability":3.0},"geometry":{"type":"LineString","coordinates":[[0.0,51.0],[0.001,51.0]]}}]}"#,
    )
    .unwrap();
    let photos = tmp.path().join("p.jsonl");
    std::fs::write(
        &photos,
        r#"{"id":"p1","lon":0.0005,"lat":51.0,"owner_id":"u","machine_tags":[{"label":"night","confidence":0.99}]}
{"id":"p2","lon":0.0005,"lat":51.0,"owner_id":"u","machine_tags":[{"label":"day","confidence":0.99}]}
"#,
    )
    .unwrap();
    let args = ["--streets", s(&streets), "--photos", s(&photos)];
    let curve = walkstreet(&[&["curve", "--metric", "photo_at_night"], &args[..]].concat());
    assert_eq!(curve.status.code(), Some(2), "{}", String::from_utf8_lossy(&curve.stderr));
    assert_eq!(walkstreet(&[&["metrics"], &args[..]].concat()).status.code(), Some(2));
    let out = tmp.path().join("out");
    let run = walkstreet(&[&["run", "--out-dir", s(&out)], &args[..]].concat());
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("degenerate") || summary.contains("need at least 2"));
}

#[test]
fn walkhood_and_agreement() {
    let tmp = tempfile::tempdir().unwrap();
    let streets = tmp.path().join("cross.geojson");
    std::fs::write(
        &streets,
        r#"{"type":"FeatureCollection","features":[
{"type":"Feature","properties":{"id":"e"},"geometry":{"type":"LineString","coordinates":[[0.0,51.0],[0.02,51.0]]}},
{"type":"Feature","properties":{"id":"w"},"geometry":{"type":"LineString","coordinates":[[0.0,51.0],[-0.02,51.0]]}},
{"type":"Feature","properties":{"id":"n"},"geometry":{"type":"LineString","coordinates":[[0.0,51.0],[0.0,51.02]]}},
{"type":"Feature","properties":{"id":"s"},"geometry":{"type":"LineString","coordinates":[[0.0,51.0],[0.0,50.98]]}}]}"#,
    )
    .unwrap();
    let o = walkstreet(&["walkhood", "--streets", s(&streets), "--lon", "0.0", "--lat", "51.0", "--minutes", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let f: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(f["geometry"]["type"], "Polygon");
    assert_eq!(f["geometry"]["coordinates"][0].as_array().unwrap().len(), 5);
    let far = walkstreet(&["walkhood", "--streets", s(&streets), "--lon", "1.0", "--lat", "51.0"]);
    assert_eq!(far.status.code(), Some(1));

    let (a, b) = (tmp.path().join("a.txt"), tmp.path().join("b.txt"));
    std::fs::write(&a, "a\nb\nc\nd\ne\n").unwrap();
    std::fs::write(&b, "# second annotator\na\nb\nc\nd\nf\n").unwrap();
    let o = walkstreet(&["agreement", s(&a), s(&b)]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["agreement"].as_f64().unwrap() - 4.0 / 6.0).abs() < 1e-12);
    assert_eq!(walkstreet(&["agreement", s(&a)]).status.code(), Some(1));
}
