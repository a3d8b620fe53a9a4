//! Local HTTP service: JSON segmentation endpoint plus corpus presets.
//!
//! Routes:
//! - `POST /api/segment`
//! - `GET /api/corpus`
//! - `GET /api/corpus/{name}`
//! - `GET /` static UI bundle (or a placeholder page)

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tower_http::services::ServeDir;

use crate::error::{Error, Result};
use crate::lattice::{decode_image, encode_mask_png, encode_png_gray, GrayImage, SeedLabel, SeedMask};
use crate::segmenter::{segment, SegmentationParams};
use crate::synthcorpus::{control_corpus, find_case};

pub const MAX_SIDE: usize = 1024;
const MAX_BODY: usize = 64 << 20;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Segmentations running at once.
    pub workers: usize,
    /// Requests waiting for a worker before new ones are turned away.
    pub queue_limit: usize,
    pub static_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            queue_limit: 64,
            static_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedClass {
    #[serde(alias = "foreground", alias = "object")]
    Fg,
    #[serde(alias = "background")]
    Bg,
    None,
}

impl From<SeedClass> for SeedLabel {
    fn from(c: SeedClass) -> Self {
        match c {
            SeedClass::Fg => SeedLabel::Foreground,
            SeedClass::Bg => SeedLabel::Background,
            SeedClass::None => SeedLabel::None,
        }
    }
}

impl From<SeedLabel> for SeedClass {
    fn from(l: SeedLabel) -> Self {
        match l {
            SeedLabel::Foreground => SeedClass::Fg,
            SeedLabel::Background => SeedClass::Bg,
            SeedLabel::None => SeedClass::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScribblePoint {
    pub x: f64,
    pub y: f64,
    pub class: SeedClass,
}

/// Seeds as scribble points painted with a disk brush, or as row-major
/// `(class, length)` runs covering the whole image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Scribbles {
        points: Vec<ScribblePoint>,
        #[serde(default = "default_brush")]
        brush_radius: f64,
    },
    RunLength {
        runs: Vec<(SeedClass, usize)>,
    },
}

fn default_brush() -> f64 {
    1.0
}

impl SeedSpec {
    pub fn rasterize(&self, width: usize, height: usize) -> Result<SeedMask> {
        match self {
            SeedSpec::Scribbles {
                points,
                brush_radius,
            } => {
                if !(brush_radius.is_finite() && *brush_radius >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "brush_radius must be finite and >= 0, got {brush_radius}"
                    )));
                }
                let mut mask = SeedMask::empty(width, height);
                for p in points {
                    let inside = p.x.is_finite()
                        && p.y.is_finite()
                        && p.x >= 0.0
                        && p.y >= 0.0
                        && p.x <= (width - 1) as f64
                        && p.y <= (height - 1) as f64;
                    if !inside {
                        return Err(Error::InvalidParameter(format!(
                            "scribble point ({}, {}) outside {width}x{height}",
                            p.x, p.y
                        )));
                    }
                    mask.paint_disk(p.x, p.y, *brush_radius, p.class.into())?;
                }
                Ok(mask)
            }
            SeedSpec::RunLength { runs } => {
                let mut labels = Vec::with_capacity(width * height);
                for &(class, len) in runs {
                    if labels.len() + len > width * height {
                        return Err(Error::InvalidGeometry(format!(
                            "seed runs exceed {width}x{height} pixels"
                        )));
                    }
                    labels.extend(std::iter::repeat_n(SeedLabel::from(class), len));
                }
                SeedMask::from_labels(width, height, labels)
            }
        }
    }

    pub fn run_length(seeds: &SeedMask) -> Self {
        let mut runs: Vec<(SeedClass, usize)> = Vec::new();
        for &l in seeds.labels() {
            let c = SeedClass::from(l);
            match runs.last_mut() {
                Some((last, n)) if *last == c => *n += 1,
                _ => runs.push((c, 1)),
            }
        }
        SeedSpec::RunLength { runs }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentRequest {
    /// Base64 PNG (or PGM), or the name of a corpus case.
    pub image: String,
    /// Optional only when `image` names a corpus case; its default seeds
    /// are used then.
    #[serde(default)]
    pub seeds: Option<SeedSpec>,
    #[serde(default)]
    pub params: Option<SegmentationParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub energy: f64,
    pub lower_bound: f64,
    pub unlabeled_count: usize,
    pub runtime_ms: f64,
    pub fallback_used: bool,
    pub probes_run: usize,
    pub seed_penalty: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentResponse {
    /// Base64 8-bit PNG, 255 = object.
    pub mask: String,
    pub width: usize,
    pub height: usize,
    pub stats: SegmentStats,
    pub params: SegmentationParams,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusCase {
    pub name: String,
    pub description: String,
    pub width: usize,
    pub height: usize,
    /// Base64 8-bit PNG.
    pub image: String,
    pub seeds: SeedSpec,
    /// Base64 8-bit PNG, 255 = object.
    pub ground_truth: String,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Internal(_) | Error::Read { .. } | Error::Write { .. } => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

struct AppState {
    workers: Semaphore,
    in_flight: AtomicUsize,
    capacity: usize,
}

struct Ticket<'a>(&'a AtomicUsize);

impl Drop for Ticket<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

pub fn router(config: ServiceConfig) -> Router {
    let workers = config.workers.max(1);
    let state = Arc::new(AppState {
        workers: Semaphore::new(workers),
        in_flight: AtomicUsize::new(0),
        capacity: workers + config.queue_limit,
    });
    let api = Router::new()
        .route("/api/segment", post(segment_handler))
        .route("/api/corpus", get(list_corpus))
        .route("/api/corpus/{name}", get(get_case))
        .layer(DefaultBodyLimit::max(MAX_BODY))
        .with_state(state);
    match config.static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(placeholder)),
    }
}

/// Binds `addr` and serves until the process is stopped.
pub fn serve(addr: &str, config: ServiceConfig) -> Result<()> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::Internal(e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::Internal(format!("cannot bind {addr}: {e}")))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(|e| Error::Internal(e.to_string()))?);
        axum::serve(listener, router(config))
            .await
            .map_err(|e| Error::Internal(e.to_string()))
    })
}

async fn placeholder() -> Html<&'static str> {
    Html(
        "<!doctype html><title>curvseg</title>\
         <p>UI bundle not installed; start with <code>--static-dir</code>. \
         API: <code>POST /api/segment</code>, <code>GET /api/corpus</code>.</p>",
    )
}

async fn list_corpus() -> Json<Vec<String>> {
    Json(control_corpus().into_iter().map(|c| c.name).collect())
}

async fn get_case(Path(name): Path<String>) -> std::result::Result<Json<CorpusCase>, ApiError> {
    let case = find_case(&name)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown corpus case '{name}'")))?;
    let (w, h) = (case.image.width(), case.image.height());
    Ok(Json(CorpusCase {
        name: case.name,
        description: case.description,
        width: w,
        height: h,
        image: B64.encode(encode_png_gray(w, h, &case.image.to_bytes())?),
        seeds: SeedSpec::run_length(&case.seeds),
        ground_truth: B64.encode(encode_mask_png(&case.ground_truth)?),
    }))
}

async fn segment_handler(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> std::result::Result<Json<SegmentResponse>, ApiError> {
    let req: SegmentRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed request: {e}")))?;
    let (image, seeds) = resolve_inputs(&req)?;
    let params = req.params.unwrap_or_default();

    let _ticket = Ticket(&state.in_flight);
    if state.in_flight.fetch_add(1, Ordering::SeqCst) >= state.capacity {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "server busy"));
    }
    let _permit = state
        .workers
        .acquire()
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;

    let result = tokio::task::spawn_blocking(move || segment(&image, &seeds, &params))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}")))??;
    let r = &result.report;
    Ok(Json(SegmentResponse {
        mask: B64.encode(encode_mask_png(&result.mask)?),
        width: result.mask.width(),
        height: result.mask.height(),
        stats: SegmentStats {
            energy: r.energy,
            lower_bound: r.lower_bound,
            unlabeled_count: r.unlabeled_count,
            runtime_ms: r.runtime_ms,
            fallback_used: r.fallback_used,
            probes_run: r.probes_run,
            seed_penalty: r.seed_penalty,
        },
        params: result.params,
    }))
}

fn resolve_inputs(req: &SegmentRequest) -> std::result::Result<(GrayImage, SeedMask), ApiError> {
    let case = find_case(&req.image);
    let image = match &case {
        Some(c) => c.image.clone(),
        None => {
            let bytes = B64.decode(req.image.trim()).map_err(|e| {
                ApiError::new(
                    StatusCode::BAD_REQUEST,
                    format!("image is neither a corpus case nor valid base64: {e}"),
                )
            })?;
            decode_image(&bytes)?
        }
    };
    let (w, h) = (image.width(), image.height());
    if w > MAX_SIDE || h > MAX_SIDE {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("image {w}x{h} exceeds {MAX_SIDE}x{MAX_SIDE}"),
        ));
    }
    let seeds = match (&req.seeds, case) {
        (Some(spec), _) => spec.rasterize(w, h)?,
        (None, Some(c)) => c.seeds,
        (None, None) => return Err(Error::MissingSeedClass.into()),
    };
    if seeds.count(SeedLabel::Foreground) == 0 || seeds.count(SeedLabel::Background) == 0 {
        return Err(Error::MissingSeedClass.into());
    }
    Ok((image, seeds))
}
