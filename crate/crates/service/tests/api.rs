mod common;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use choreo_service::api::{router, serve, AppState, ClipView, DatasetView, MotifView, SynthResponse, TemplateView};
use choreo_service::pipeline::Bundle;
use choreo_service::ProjectConfig;
use http_body_util::BodyExt;
use tower::ServiceExt;

fn app() -> (common::Project, AppState) {
    let p = common::project();
    let cfg = ProjectConfig::load(&p.config).unwrap();
    let bundle = Bundle::from_config(&cfg).unwrap();
    let state = AppState::new(bundle, cfg, None);
    (p, state)
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    call(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(app: &Router, uri: &str, body: &str) -> (StatusCode, Vec<u8>) {
    let req = Request::post(uri).header("content-type", "application/json").body(Body::from(body.to_string())).unwrap();
    call(app, req).await
}

fn json<T: serde::de::DeserializeOwned>(b: &[u8]) -> T {
    serde_json::from_slice(b).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(b)))
}

#[tokio::test]
async fn catalogue_endpoints() {
    let (_p, state) = app();
    let app = router(state);
    let (s, b) = get(&app, "/api/motifs").await;
    assert_eq!(s, StatusCode::OK);
    let motifs: Vec<MotifView> = json(&b);
    assert_eq!(motifs.len(), 6);
    let total: f64 = motifs.iter().map(|m| m.template_frequency).sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert!(motifs.iter().all(|m| !m.preview.is_empty() && m.member_count > 0));

    let (s, b) = get(&app, "/api/dataset").await;
    assert_eq!(s, StatusCode::OK);
    let d: DatasetView = json(&b);
    assert_eq!((d.k, d.dances.len(), d.fps), (6, 4, 30.0));
    assert_eq!(d.genres["synthetic"], 4);

    let (s, b) = get(&app, "/api/signature/template").await;
    assert_eq!(s, StatusCode::OK);
    let t: TemplateView = json(&b);
    assert_eq!(t.values.len(), 6);
    assert_eq!(t.genres, vec!["synthetic".to_string()]);
    let (s, _) = get(&app, "/api/signature/template?genre=synthetic").await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = get(&app, "/api/signature/template?genre=tango").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn synthesize_then_fetch() {
    let (_p, state) = app();
    let app = router(state);
    let body = r#"{"beats": [0, 14, 30, 45, 61, 75], "seed": 3, "constraints": [{"beat": 2, "motif": 4}]}"#;
    let (s, b) = post(&app, "/api/synthesize", body).await;
    assert_eq!(s, StatusCode::OK, "{}", String::from_utf8_lossy(&b));
    let r: SynthResponse = json(&b);
    assert_eq!(r.frame_count, 75);
    assert_eq!(r.motif_timeline[2].motif, 4);
    assert!(r.motif_timeline[2].constrained);

    let (s, b) = get(&app, &format!("/api/clips/{}", r.id)).await;
    assert_eq!(s, StatusCode::OK);
    let clip: ClipView = json(&b);
    assert_eq!(clip.frame_count, 75);
    assert_eq!(clip.frames.len(), 75);
    assert_eq!(clip.beat_frames, vec![0, 14, 30, 45, 61, 75]);
    assert_eq!(clip.joints.len(), clip.frames[0].rotations.len());
    assert_eq!(clip.signature_trace.len(), 5);

    let (s, b) = get(&app, &format!("/api/clips/{}/bvh", r.id)).await;
    assert_eq!(s, StatusCode::OK);
    let parsed = choreo_core::io::parse_bvh::<f64>(&String::from_utf8(b).unwrap()).unwrap();
    assert_eq!(parsed.len(), 75);

    // same request, same id
    let (_, b) = post(&app, "/api/synthesize", body).await;
    assert_eq!(json::<SynthResponse>(&b).id, r.id);
    let (s, _) = get(&app, "/api/clips/nope").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn tempo_requests_and_pins_everywhere() {
    let (_p, state) = app();
    let app = router(state);
    let pins: Vec<String> = (0..8).map(|b| format!(r#"{{"beat": {b}, "motif": {}}}"#, b % 6)).collect();
    let body = format!(r#"{{"bpm": 120, "duration": 4, "style": "none", "constraints": [{}]}}"#, pins.join(","));
    let (s, b) = post(&app, "/api/synthesize", &body).await;
    assert_eq!(s, StatusCode::OK, "{}", String::from_utf8_lossy(&b));
    let r: SynthResponse = json(&b);
    assert_eq!(r.frame_count, 120);
    let got: Vec<usize> = r.motif_timeline.iter().map(|e| e.motif).collect();
    assert_eq!(got, (0..8).map(|b| b % 6).collect::<Vec<_>>());
}

#[tokio::test]
async fn bad_requests_get_400_with_message() {
    let (_p, state) = app();
    let app = router(state);
    for body in [
        "{not json",
        r#"{"beats": [0, 10], "colour": "red"}"#,
        r#"{"beats": [5]}"#,
        r#"{"beats": [0, 20, 10]}"#,
        r#"{"bpm": 120}"#,
        r#"{"beats": [0, 15, 30], "constraints": [{"beat": 0, "motif": 99}]}"#,
        r#"{"beats": [0, 15, 30], "backend": "lstm"}"#,
        r#"{"beats": [0, 15, 30], "genre": "tango"}"#,
    ] {
        let (s, b) = post(&app, "/api/synthesize", body).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{body}: {}", String::from_utf8_lossy(&b));
        let e: serde_json::Value = json(&b);
        assert!(!e["error"].as_str().unwrap().is_empty());
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_requests_match_serial() {
    let (_p, state) = app();
    let app = router(state.clone());
    let bodies: Vec<String> = (0..6).map(|s| format!(r#"{{"bpm": 130, "duration": 5, "seed": {s}}}"#)).collect();
    let mut serial = Vec::new();
    for b in &bodies {
        serial.push(json::<SynthResponse>(&post(&app, "/api/synthesize", b).await.1));
    }
    let fresh = router(AppState::new((*state.bundle).clone(), (*state.config).clone(), None));
    let handles: Vec<_> = bodies
        .iter()
        .cloned()
        .map(|b| {
            let app = fresh.clone();
            tokio::spawn(async move { post(&app, "/api/synthesize", &b).await })
        })
        .collect();
    for (h, want) in handles.into_iter().zip(&serial) {
        let (s, b) = h.await.unwrap();
        assert_eq!(s, StatusCode::OK);
        assert_eq!(&json::<SynthResponse>(&b), want);
    }
    for r in &serial {
        let a = get(&app, &format!("/api/clips/{}/bvh", r.id)).await.1;
        let b = get(&fresh, &format!("/api/clips/{}/bvh", r.id)).await.1;
        assert_eq!(a, b);
    }
}

#[tokio::test]
async fn busy_port_is_a_startup_error() {
    let (_p, state) = app();
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port();
    let err = serve(state, "127.0.0.1", port).await.unwrap_err();
    assert!(err.to_string().contains("cannot listen"), "{err}");
}
