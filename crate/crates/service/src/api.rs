//! JSON API over a read-only bundle snapshot.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use choreo_core::synthesis::{ContactSpans, TimelineEntry};
use choreo_core::Pose;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::config::ProjectConfig;
use crate::error::ServiceError;
use crate::pipeline::{synthesize, Bundle, ClipRecord, LoadedNet, SynthRequest};

/// Shared state: the bundle and config never change after startup; clips
/// are added by one writer at a time.
#[derive(Clone)]
pub struct AppState {
    pub bundle: Arc<Bundle>,
    pub config: Arc<ProjectConfig>,
    pub net: Option<Arc<LoadedNet>>,
    pub clips: Arc<RwLock<BTreeMap<String, Arc<ClipRecord>>>>,
    pub jobs: Arc<Semaphore>,
}

impl AppState {
    pub fn new(bundle: Bundle, config: ProjectConfig, net: Option<LoadedNet>) -> Self {
        let workers = config.server.workers.max(1);
        Self {
            bundle: Arc::new(bundle),
            config: Arc::new(config),
            net: net.map(Arc::new),
            clips: Arc::default(),
            jobs: Arc::new(Semaphore::new(workers)),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/dataset", get(dataset))
        .route("/api/motifs", get(motifs))
        .route("/api/signature/template", get(template))
        .route("/api/synthesize", post(synthesize_clip))
        .route("/api/clips/{id}", get(clip))
        .route("/api/clips/{id}/bvh", get(clip_bvh))
        .with_state(state)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(ErrorBody { error: self.to_string() })).into_response()
    }
}

type ApiResult<T> = Result<T, ServiceError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DanceSummary {
    pub name: String,
    pub genre: String,
    pub frames: usize,
    pub beats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetView {
    pub fps: f64,
    pub joints: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub d: usize,
    pub words: usize,
    pub genres: BTreeMap<String, usize>,
    pub dances: Vec<DanceSummary>,
}

async fn dataset(State(s): State<AppState>) -> Json<DatasetView> {
    let lib = &s.bundle.library;
    let dances: Vec<DanceSummary> = s
        .bundle
        .store
        .entries
        .iter()
        .map(|e| DanceSummary {
            name: e.name.clone(),
            genre: e.genre.clone(),
            frames: e.clip.len(),
            beats: e.beats.beat_frames.len(),
        })
        .collect();
    let mut genres = BTreeMap::new();
    for d in &dances {
        *genres.entry(d.genre.clone()).or_insert(0) += 1;
    }
    Json(DatasetView {
        fps: lib.table.fps,
        joints: lib.table.skeleton.joint_count(),
        k: lib.table.k(),
        d: lib.table.dim(),
        words: lib.words.len(),
        genres,
        dances,
    })
}

/// One frame as sent to clients: root displacement and `(w, x, y, z)` per joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameView {
    pub root: [f64; 3],
    pub rotations: Vec<[f64; 4]>,
}

impl From<&Pose> for FrameView {
    fn from(p: &Pose) -> Self {
        Self { root: p.root_displacement.to_array(), rotations: p.rotations.iter().map(|q| q.to_array()).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifView {
    pub id: usize,
    pub member_count: usize,
    pub template_frequency: f64,
    pub preview: Vec<FrameView>,
}

#[derive(Debug, Deserialize)]
struct GenreQuery {
    genre: Option<String>,
}

async fn motifs(State(s): State<AppState>, Query(q): Query<GenreQuery>) -> ApiResult<Json<Vec<MotifView>>> {
    let lib = &s.bundle.library;
    let template = lib.template(q.genre.as_deref()).map_err(|e| ServiceError::NotFound(e.to_string()))?;
    let counts = lib.member_counts();
    Ok(Json(
        lib.table
            .motif_words
            .iter()
            .enumerate()
            .map(|(id, w)| MotifView {
                id,
                member_count: counts[id],
                template_frequency: template.0[id],
                preview: w.frames.iter().map(FrameView::from).collect(),
            })
            .collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateView {
    pub genre: Option<String>,
    pub genres: Vec<String>,
    pub values: Vec<f64>,
}

async fn template(State(s): State<AppState>, Query(q): Query<GenreQuery>) -> ApiResult<Json<TemplateView>> {
    let lib = &s.bundle.library;
    let t = lib.template(q.genre.as_deref()).map_err(|e| ServiceError::NotFound(e.to_string()))?;
    Ok(Json(TemplateView { genre: q.genre, genres: lib.templates.keys().cloned().collect(), values: t.0.clone() }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthResponse {
    pub id: String,
    pub frame_count: usize,
    pub motif_timeline: Vec<TimelineEntry>,
    pub final_distance: Option<f64>,
    pub flags: Vec<String>,
}

impl From<&ClipRecord> for SynthResponse {
    fn from(r: &ClipRecord) -> Self {
        Self {
            id: r.id.clone(),
            frame_count: r.clip.len(),
            motif_timeline: r.sidecar.motif_timeline.clone(),
            final_distance: r.sidecar.signature_trace.last().copied(),
            flags: r.sidecar.flags.clone(),
        }
    }
}

async fn synthesize_clip(State(s): State<AppState>, body: Bytes) -> ApiResult<Json<SynthResponse>> {
    let request: SynthRequest =
        serde_json::from_slice(&body).map_err(|e| ServiceError::BadRequest(format!("malformed request body: {e}")))?;
    let _permit = s.jobs.clone().acquire_owned().await.map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    let state = s.clone();
    let record = tokio::task::spawn_blocking(move || -> Result<ClipRecord, ServiceError> {
        let grid = request.beat_grid(state.bundle.library.table.fps)?;
        synthesize(&state.bundle, &state.config, &request, grid, state.net.as_deref())
    })
    .await
    .map_err(|e| ServiceError::Config(format!("synthesis task failed: {e}")))??;
    let response = SynthResponse::from(&record);
    s.clips.write().expect("clip store lock").entry(record.id.clone()).or_insert_with(|| Arc::new(record));
    Ok(Json(response))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointView {
    pub name: String,
    pub parent: Option<usize>,
    pub offset: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipView {
    pub id: String,
    pub fps: f64,
    pub frame_count: usize,
    pub joints: Vec<JointView>,
    pub end_sites: Vec<JointView>,
    pub root_origin: [f64; 3],
    pub frames: Vec<FrameView>,
    pub beat_frames: Vec<usize>,
    pub motif_timeline: Vec<TimelineEntry>,
    pub signature_trace: Vec<f64>,
    pub contact_spans: ContactSpans,
    pub flags: Vec<String>,
}

impl From<&ClipRecord> for ClipView {
    fn from(r: &ClipRecord) -> Self {
        let skel = &r.clip.skeleton;
        Self {
            id: r.id.clone(),
            fps: r.clip.fps,
            frame_count: r.clip.len(),
            joints: skel
                .joints()
                .iter()
                .map(|j| JointView { name: j.name.clone(), parent: j.parent, offset: j.offset.to_array() })
                .collect(),
            end_sites: skel
                .end_sites()
                .iter()
                .map(|e| JointView { name: e.name.clone(), parent: Some(e.parent), offset: e.offset.to_array() })
                .collect(),
            root_origin: r.clip.root_origin.to_array(),
            frames: r.clip.frames.iter().map(FrameView::from).collect(),
            beat_frames: r.sidecar.beat_frames.clone(),
            motif_timeline: r.sidecar.motif_timeline.clone(),
            signature_trace: r.sidecar.signature_trace.clone(),
            contact_spans: r.sidecar.contact_spans.clone(),
            flags: r.sidecar.flags.clone(),
        }
    }
}

fn lookup(s: &AppState, id: &str) -> ApiResult<Arc<ClipRecord>> {
    s.clips
        .read()
        .expect("clip store lock")
        .get(id)
        .cloned()
        .ok_or_else(|| ServiceError::NotFound(format!("clip {id}")))
}

async fn clip(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ClipView>> {
    Ok(Json(ClipView::from(lookup(&s, &id)?.as_ref())))
}

async fn clip_bvh(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let rec = lookup(&s, &id)?;
    Ok((StatusCode::OK, [(header::CONTENT_TYPE, "text/plain; charset=utf-8")], rec.bvh()).into_response())
}

/// Binds `host:port` and serves until interrupted. Binding errors (port in
/// use) are returned before any request is accepted.
pub async fn serve(state: AppState, host: &str, port: u16) -> crate::error::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port))
        .await
        .map_err(|e| ServiceError::Config(format!("cannot listen on {host}:{port}: {e}")))?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
