//! Verbalization, prediction, template editing and authoring sessions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use argnli_core::corpus::{
    char_slice, generate_candidates, Argument, Document, EntityMention, EventMention, Span,
};
use argnli_core::inference::{plan_candidate, predict_role, InferenceError};
use argnli_core::templates::{EventContext, Hypothesis, TemplateError, TemplateSpec};
use argnli_core::{
    Candidate, ConstraintTable, InferenceConfig, Label, RolePrediction, Scorer, TemplateLibrary,
};
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::error::{parse_body, ApiError};

/// A developer's working copy of the library plus per-role authoring time.
#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub library: TemplateLibrary,
    pub timers: BTreeMap<String, f64>,
}

pub struct AppState {
    library: RwLock<Arc<TemplateLibrary>>,
    library_path: Option<PathBuf>,
    /// Serializes writers of the shared library and its file.
    save_lock: Mutex<()>,
    table: ConstraintTable,
    scorer: Arc<Scorer>,
    inference: InferenceConfig,
    corpus: Vec<Document>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

impl AppState {
    pub fn new(
        library: TemplateLibrary,
        library_path: Option<PathBuf>,
        table: ConstraintTable,
        scorer: Scorer,
        inference: InferenceConfig,
        corpus: Vec<Document>,
    ) -> Self {
        AppState {
            library: RwLock::new(Arc::new(library)),
            library_path,
            save_lock: Mutex::new(()),
            table,
            scorer: Arc::new(scorer),
            inference,
            corpus,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn from_config(cfg: &crate::ServiceConfig) -> Result<Self, crate::ServiceConfigError> {
        Ok(AppState::new(
            cfg.load_library()?,
            cfg.library.clone(),
            cfg.load_constraints()?,
            cfg.build_scorer()?,
            cfg.inference()?,
            cfg.load_corpus()?,
        ))
    }

    pub fn library(&self) -> Arc<TemplateLibrary> {
        self.library.read().clone()
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .lock()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session `{id}`")))
    }

    /// The library a request works against.
    fn library_for(&self, q: &SessionQuery) -> Result<Arc<TemplateLibrary>, ApiError> {
        match &q.session {
            Some(id) => Ok(Arc::new(self.session(id)?.lock().library.clone())),
            None => Ok(self.library()),
        }
    }

    /// Writes `next` to the library file (if any) and then swaps it in. A
    /// failed write leaves both the file and the served library untouched.
    fn commit_library(&self, next: TemplateLibrary) -> Result<(), ApiError> {
        let _guard = self.save_lock.lock();
        if let Some(path) = &self.library_path {
            write_atomically(path, next.to_json().as_bytes())
                .map_err(|e| ApiError::internal(format!("cannot persist library: {e}")))?;
        }
        *self.library.write() = Arc::new(next);
        Ok(())
    }
}

fn write_atomically(path: &std::path::Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => std::path::Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct SessionQuery {
    pub session: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerRef {
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub event_type: String,
    pub subtype: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRef {
    pub start: usize,
    pub end: usize,
    pub entity_type: String,
}

/// A single (trigger, candidate) pair in free text. The whole context is the
/// premise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateRequest {
    pub context: String,
    pub trigger: TriggerRef,
    pub candidate: CandidateRef,
    /// Explicit roles to verbalize instead of the constraint-allowed ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roles: Option<BTreeSet<String>>,
}

const REQUEST_DOC: &str = "request";
const REQUEST_EVENT: &str = "trigger";
const REQUEST_ENTITY: &str = "candidate";

impl CandidateRequest {
    /// One-sentence document holding the trigger and the candidate.
    pub fn to_document(&self) -> Result<(Document, Candidate), ApiError> {
        let span = |start, end, what: &str| {
            let s = Span::new(start, end);
            match char_slice(&self.context, s) {
                Some(text) if start < end => Ok((s, text.to_string())),
                _ => Err(ApiError::bad_request(format!(
                    "{what} span [{start}, {end}) is invalid for the context"
                ))),
            }
        };
        let (trigger_span, trigger_surface) =
            span(self.trigger.start, self.trigger.end, "trigger")?;
        let (arg_span, arg_surface) = span(self.candidate.start, self.candidate.end, "candidate")?;
        let doc = Document {
            id: REQUEST_DOC.into(),
            sentences: vec![Span::new(0, self.context.chars().count())],
            entities: vec![EntityMention {
                id: REQUEST_ENTITY.into(),
                span: arg_span,
                surface: arg_surface,
                entity_type: self.candidate.entity_type.clone(),
            }],
            events: vec![EventMention {
                id: REQUEST_EVENT.into(),
                trigger_span,
                trigger_surface,
                event_type: self.trigger.event_type.clone(),
                event_subtype: self.trigger.subtype.clone(),
                arguments: Vec::<Argument>::new(),
            }],
            coref_chains: vec![],
            text: self.context.clone(),
        };
        doc.validate()
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        let candidate = Candidate {
            document_id: REQUEST_DOC.into(),
            event_id: REQUEST_EVENT.into(),
            entity_id: REQUEST_ENTITY.into(),
            gold_role: Label::Negative,
        };
        Ok((doc, candidate))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerbalizeResponse {
    pub roles: BTreeSet<String>,
    pub hypotheses: Vec<Hypothesis>,
}

fn unknown_roles(lib: &TemplateLibrary, roles: &BTreeSet<String>) -> Result<(), ApiError> {
    let missing: Vec<&str> = roles
        .iter()
        .filter(|r| lib.templates(r).is_none())
        .map(String::as_str)
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(ApiError::not_found(format!(
            "unknown role(s): {}",
            missing.join(", ")
        )))
    }
}

fn inference_error(e: InferenceError) -> ApiError {
    match e {
        InferenceError::Entailment(e) => {
            ApiError::new(StatusCode::BAD_GATEWAY, format!("entailment backend: {e}"))
        }
        InferenceError::Constraint(e) => ApiError::bad_request(e.to_string()),
        InferenceError::Template(TemplateError::UnknownRoles(r)) => {
            ApiError::not_found(format!("unknown role(s): {}", r.join(", ")))
        }
        other => ApiError::unprocessable(other.to_string()),
    }
}

/// Verbalizes a request exactly as the library would.
pub fn verbalize_request(
    req: &CandidateRequest,
    lib: &TemplateLibrary,
    table: &ConstraintTable,
) -> Result<VerbalizeResponse, ApiError> {
    let (doc, cand) = req.to_document()?;
    match &req.roles {
        Some(roles) => {
            unknown_roles(lib, roles)?;
            let ev = &doc.events[0];
            let key = ev.subtype_key();
            let ctx = EventContext::new(&ev.trigger_surface, &ev.event_type, &key);
            let hypotheses = lib
                .verbalize_role_set(&ctx, &doc.entities[0].surface, roles)
                .map_err(|e| ApiError::unprocessable(e.to_string()))?;
            Ok(VerbalizeResponse {
                roles: roles.clone(),
                hypotheses,
            })
        }
        None => {
            let plan = plan_candidate(&cand, &doc, lib, table).map_err(inference_error)?;
            Ok(VerbalizeResponse {
                roles: plan.allowed_roles,
                hypotheses: plan.hypotheses,
            })
        }
    }
}

/// Predicts a request exactly as `predict_role` would.
pub fn predict_request(
    req: &CandidateRequest,
    lib: &TemplateLibrary,
    table: &ConstraintTable,
    scorer: &Scorer,
    cfg: &InferenceConfig,
) -> Result<RolePrediction, ApiError> {
    let (doc, cand) = req.to_document()?;
    let restricted;
    let table = match &req.roles {
        Some(roles) => {
            unknown_roles(lib, roles)?;
            restricted = ConstraintTable::allow_all(roles.iter().cloned());
            &restricted
        }
        None => table,
    };
    predict_role(&cand, &doc, lib, table, scorer, cfg).map_err(inference_error)
}

async fn verbalize(
    State(state): State<Arc<AppState>>,
    Query(q): Query<SessionQuery>,
    body: Bytes,
) -> Result<Json<VerbalizeResponse>, ApiError> {
    let req: CandidateRequest = parse_body(&body)?;
    let lib = state.library_for(&q)?;
    verbalize_request(&req, &lib, &state.table).map(Json)
}

async fn predict(
    State(state): State<Arc<AppState>>,
    Query(q): Query<SessionQuery>,
    body: Bytes,
) -> Result<Json<RolePrediction>, ApiError> {
    let req: CandidateRequest = parse_body(&body)?;
    let lib = state.library_for(&q)?;
    let st = state.clone();
    tokio::task::spawn_blocking(move || {
        predict_request(&req, &lib, &st.table, &st.scorer, &st.inference)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))?
    .map(Json)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleTemplates {
    pub role: String,
    pub templates: Vec<TemplateSpec>,
}

async fn get_templates(
    State(state): State<Arc<AppState>>,
    Path(role): Path<String>,
    Query(q): Query<SessionQuery>,
) -> Result<Json<RoleTemplates>, ApiError> {
    let lib = state.library_for(&q)?;
    let list = lib
        .templates(&role)
        .ok_or_else(|| ApiError::not_found(format!("unknown role `{role}`")))?;
    Ok(Json(RoleTemplates {
        role,
        templates: list.iter().map(TemplateSpec::from).collect(),
    }))
}

#[derive(Debug, Clone, Deserialize)]
struct PutTemplates {
    templates: Vec<TemplateSpec>,
}

async fn put_templates(
    State(state): State<Arc<AppState>>,
    Path(role): Path<String>,
    Query(q): Query<SessionQuery>,
    body: Bytes,
) -> Result<Json<RoleTemplates>, ApiError> {
    let put: PutTemplates = parse_body(&body)?;
    let templates = put
        .templates
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, spec)| {
            spec.into_template(&role)
                .map_err(|e| ApiError::unprocessable(format!("template {i}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let unprocessable = |e: TemplateError| ApiError::unprocessable(e.to_string());
    match &q.session {
        Some(id) => {
            let session = state.session(id)?;
            let mut s = session.lock();
            s.library
                .set_role(&role, templates)
                .map_err(unprocessable)?;
        }
        None => {
            let mut next = (*state.library()).clone();
            next.set_role(&role, templates).map_err(unprocessable)?;
            state.commit_library(next)?;
        }
    }
    get_templates(State(state), Path(role), Query(q)).await
}

#[derive(Debug, Clone, Default, Deserialize)]
struct NewSession {
    #[serde(default)]
    developer: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub developer: String,
    pub roles: Vec<String>,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> Result<Json<SessionInfo>, ApiError> {
    let req: NewSession = if body.is_empty() {
        NewSession::default()
    } else {
        parse_body(&body)?
    };
    let mut library = (*state.library()).clone();
    if let Some(dev) = req.developer {
        library.metadata.developer = dev;
    }
    let id = Uuid::new_v4().to_string();
    let info = SessionInfo {
        id: id.clone(),
        developer: library.metadata.developer.clone(),
        roles: library.roles().map(str::to_string).collect(),
    };
    let session = Session {
        id: id.clone(),
        library,
        timers: BTreeMap::new(),
    };
    state
        .sessions
        .lock()
        .insert(id, Arc::new(Mutex::new(session)));
    Ok(Json(info))
}

#[derive(Debug, Clone, Deserialize)]
struct Heartbeat {
    role: String,
    seconds: f64,
}

async fn heartbeat(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<BTreeMap<String, f64>>, ApiError> {
    let hb: Heartbeat = parse_body(&body)?;
    if !(hb.seconds.is_finite() && hb.seconds >= 0.0) {
        return Err(ApiError::bad_request(
            "seconds must be a non-negative number",
        ));
    }
    let session = state.session(&id)?;
    let mut s = session.lock();
    if s.library.templates(&hb.role).is_none() {
        return Err(ApiError::not_found(format!("unknown role `{}`", hb.role)));
    }
    *s.timers.entry(hb.role.clone()).or_default() += hb.seconds;
    *s.library
        .metadata
        .elapsed_seconds_per_role
        .entry(hb.role)
        .or_default() += hb.seconds;
    Ok(Json(s.timers.clone()))
}

async fn timers(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<BTreeMap<String, f64>>, ApiError> {
    Ok(Json(state.session(&id)?.lock().timers.clone()))
}

async fn save_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<SessionInfo>, ApiError> {
    let session = state.session(&id)?;
    let lib = session.lock().library.clone();
    lib.validate()
        .map_err(|e| ApiError::unprocessable(e.to_string()))?;
    let info = SessionInfo {
        id,
        developer: lib.metadata.developer.clone(),
        roles: lib.roles().map(str::to_string).collect(),
    };
    state.commit_library(lib)?;
    Ok(Json(info))
}

#[derive(Debug, Clone, Deserialize)]
struct ExampleQuery {
    role: Option<String>,
    #[serde(default = "default_limit")]
    limit: usize,
}

fn default_limit() -> usize {
    5
}

/// A corpus candidate ready to send to `/v1/verbalize` or `/v1/predict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub doc: String,
    pub event: String,
    pub entity: String,
    pub gold_role: Label,
    pub request: CandidateRequest,
}

/// The first `limit` candidates (optionally of one gold role) in corpus
/// order, with offsets relative to the trigger sentence.
pub fn examples(corpus: &[Document], role: Option<&str>, limit: usize) -> Vec<Example> {
    let mut out = Vec::new();
    for doc in corpus {
        for c in generate_candidates(doc) {
            if out.len() >= limit {
                return out;
            }
            if role.is_some_and(|r| c.gold_role.role() != Some(r)) {
                continue;
            }
            let (Some(ev), Some(ent)) = (doc.event(&c.event_id), doc.entity(&c.entity_id)) else {
                continue;
            };
            let Some(si) = doc.sentence_of(ev.trigger_span) else {
                continue;
            };
            let base = doc.sentences[si].start;
            out.push(Example {
                doc: doc.id.clone(),
                event: ev.id.clone(),
                entity: ent.id.clone(),
                gold_role: c.gold_role.clone(),
                request: CandidateRequest {
                    context: doc.sentence_text(si).unwrap_or_default().to_string(),
                    trigger: TriggerRef {
                        start: ev.trigger_span.start - base,
                        end: ev.trigger_span.end - base,
                        event_type: ev.event_type.clone(),
                        subtype: ev.event_subtype.clone(),
                    },
                    candidate: CandidateRef {
                        start: ent.span.start - base,
                        end: ent.span.end - base,
                        entity_type: ent.entity_type.clone(),
                    },
                    roles: None,
                },
            });
        }
    }
    out
}

async fn list_examples(
    State(state): State<Arc<AppState>>,
    Query(q): Query<ExampleQuery>,
) -> Json<Vec<Example>> {
    Json(examples(&state.corpus, q.role.as_deref(), q.limit))
}

async fn health() -> &'static str {
    "ok"
}

pub fn app(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/verbalize", post(verbalize))
        .route("/v1/predict", post(predict))
        .route(
            "/v1/templates/{role}",
            get(get_templates).put(put_templates),
        )
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}/heartbeat", post(heartbeat))
        .route("/v1/sessions/{id}/timers", get(timers))
        .route("/v1/sessions/{id}/save", post(save_session))
        .route("/v1/examples", get(list_examples))
        .with_state(state)
}
