mod common;

use choreo_core::synthesis::Sidecar;
use common::{project, read, run_cli};

#[test]
fn empty_manifest_gives_empty_store() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.json");
    std::fs::write(&manifest, "[]").unwrap();
    let out = dir.path().join("store.json");
    let msg = run_cli(&["choreo", "ingest", manifest.to_str().unwrap(), "--out", out.to_str().unwrap()]).unwrap();
    assert!(msg.contains("ingested 0 dances"));
    let store = choreo_service::store::CorpusStore::load(&out).unwrap();
    assert!(store.entries.is_empty());
}

#[test]
fn pipeline_artifacts_and_reproducibility() {
    let a = project();
    let b = project();
    assert_eq!(read(&a.path("corpus.json")), read(&b.path("corpus.json")));
    for f in ["manifest.json", "centroids.f32", "basis.f32", "transition.json", "motifs.json", "library.json"] {
        assert_eq!(read(&a.path("bundle").join(f)), read(&b.path("bundle").join(f)), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&read(&a.path("bundle/manifest.json"))).unwrap();
    assert_eq!(manifest["provenance"]["seed"], 5);
    assert_eq!(manifest["K"], 6);

    for p in [&a, &b] {
        p.run(&["synth", "--bpm", "120", "--duration", "8", "--out", p.path("out/clip.bvh").to_str().unwrap()]).unwrap();
    }
    assert_eq!(read(&a.path("out/clip.bvh")), read(&b.path("out/clip.bvh")));
    assert_eq!(read(&a.path("out/clip.json")), read(&b.path("out/clip.json")));
    let side: Sidecar = serde_json::from_slice(&read(&a.path("out/clip.json"))).unwrap();
    assert_eq!(side.provenance["seed"], 5);
    assert_eq!(side.frame_count, 240);
    assert_eq!(side.motif_timeline.len(), 16);
}

#[test]
fn constraints_on_every_beat_are_echoed() {
    let p = project();
    let pins: Vec<serde_json::Value> = (0..16).map(|b| serde_json::json!({"beat": b, "motif": (b * 5) % 6})).collect();
    let file = p.path("pins.json");
    std::fs::write(&file, serde_json::to_string(&pins).unwrap()).unwrap();
    let out = p.path("pinned.bvh");
    p.run(&["synth", "--bpm", "120", "--duration", "8", "--constraints", file.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .unwrap();
    let side: Sidecar = serde_json::from_slice(&read(&p.path("pinned.json"))).unwrap();
    let motifs: Vec<usize> = side.motif_timeline.iter().map(|e| e.motif).collect();
    assert_eq!(motifs, (0..16).map(|b| (b * 5) % 6).collect::<Vec<_>>());
    assert!(side.motif_timeline.iter().all(|e| e.constrained));
}

#[test]
fn lstm_backend_needs_a_checkpoint() {
    let p = project();
    let out = p.path("x.bvh");
    let err = p.run(&["synth", "--bpm", "120", "--duration", "4", "--backend", "lstm", "--out", out.to_str().unwrap()]).unwrap_err();
    assert!(err.to_string().contains("checkpoint"), "{err}");
    assert!(!out.exists());
}

#[test]
fn train_then_lstm_synthesis() {
    let p = project();
    let msg = p.run(&["train"]).unwrap();
    assert!(msg.contains("trained 3 iterations"), "{msg}");
    let curve = String::from_utf8(read(&p.path("posenet.csv"))).unwrap();
    assert!(curve.starts_with("iteration,total,coherence,autoconditioned,perceptual\n"));
    assert_eq!(curve.lines().count(), 4);
    let out = p.path("lstm.bvh");
    p.run(&["synth", "--bpm", "120", "--duration", "4", "--backend", "lstm", "--out", out.to_str().unwrap()]).unwrap();
    let side: Sidecar = serde_json::from_slice(&read(&p.path("lstm.json"))).unwrap();
    assert_eq!(side.frame_count, 120);
    let clip = choreo_core::io::parse_bvh::<f64>(&String::from_utf8(read(&out)).unwrap()).unwrap();
    assert_eq!(clip.len(), 120);
}

#[test]
fn eval_commands_report_json() {
    let p = project();
    let out = p.path("c.bvh");
    p.run(&["synth", "--bpm", "120", "--duration", "8", "--style", "none", "--out", out.to_str().unwrap()]).unwrap();
    let csv = p.path("beats.csv");
    let text = p
        .run(&["eval", "beats", "--bvh", out.to_str().unwrap(), "--beats", p.path("c.json").to_str().unwrap(), "--csv", csv.to_str().unwrap()])
        .unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let ratio = v["report"]["ratio_aligned"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&ratio));
    assert_eq!(String::from_utf8(read(&csv)).unwrap().lines().count(), 241);

    let sig = p.run(&["eval", "signature", "--runs", "4", "--length", "60"]).unwrap();
    let v: serde_json::Value = serde_json::from_str(&sig).unwrap();
    assert!(v["guided_final"].as_f64().unwrap() >= 0.0);
    let side = p.run(&["eval", "signature", "--sidecar", p.path("c.json").to_str().unwrap()]).unwrap();
    let v: serde_json::Value = serde_json::from_str(&side).unwrap();
    assert_eq!(v["beats"], 16);
}

#[test]
fn config_errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[motif]\nclusters = 4\n").unwrap();
    let err = run_cli(&["choreo", "--config", cfg.to_str().unwrap(), "config"]).unwrap_err();
    assert!(err.to_string().contains("clusters"), "{err}");
    let ok = dir.path().join("ok.toml");
    std::fs::write(&ok, "seed = 9\n").unwrap();
    let text = run_cli(&["choreo", "--config", ok.to_str().unwrap(), "--seed", "11", "config"]).unwrap();
    assert!(text.contains("seed = 11"), "{text}");
}
